#include "hwaware/model_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace hwaware {

using nlohmann::json;

namespace {

constexpr const char* kModelFormat = "hwaware-variability-model";

const json& section(const json& doc, const char* name) {
    auto it = doc.find(name);
    if (it == doc.end()) throw ModelFormatError(std::string("missing section '") + name + "'");
    if (!it->is_object()) {
        throw ModelFormatError(std::string("section '") + name + "' must be an object");
    }
    return *it;
}

double number(const json& obj, const char* section_name, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end() || !it->is_number()) {
        throw ModelFormatError(std::string("section '") + section_name + "': field '" + field +
                               "' missing or not a number");
    }
    return it->get<double>();
}

std::vector<double> number_list(const json& value, const std::string& where) {
    if (!value.is_array()) throw ModelFormatError(where + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(value.size());
    for (const auto& v : value) {
        if (!v.is_number()) throw ModelFormatError(where + " contains a non-number");
        out.push_back(v.get<double>());
    }
    return out;
}

// Minimal CSV reader for the characterization exports: comma separated,
// no quoting, header row checked against the expected column names.
class CsvReader {
public:
    CsvReader(const std::filesystem::path& path, std::vector<std::string> header)
        : path_(path), in_(path), expected_(std::move(header)) {
        if (!in_) throw ModelFormatError("cannot open " + path.string());
        std::vector<std::string> got;
        if (!next(got)) throw ModelFormatError(path.string() + ": empty file");
        if (got != expected_) {
            std::string want;
            for (const auto& h : expected_) want += (want.empty() ? "" : ",") + h;
            throw ModelFormatError(path.string() + ":1: expected header '" + want + "'");
        }
    }

    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            fields.clear();
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) fields.push_back(trim(cell));
            if (line.back() == ',') fields.emplace_back();
            if (!expected_.empty() && line_no_ > 1 && fields.size() != expected_.size()) {
                fail("expected " + std::to_string(expected_.size()) + " fields, got " +
                     std::to_string(fields.size()));
            }
            return true;
        }
        return false;
    }

    double to_double(const std::string& s, const char* field) const {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            fail(std::string("field '") + field + "': '" + s + "' is not a number");
        }
        return v;
    }

    std::uint32_t to_uint(const std::string& s, const char* field) const {
        std::uint32_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            fail(std::string("field '") + field + "': '" + s + "' is not a non-negative integer");
        }
        return v;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ModelFormatError(path_.string() + ":" + std::to_string(line_no_) + ": " + what);
    }

private:
    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return {};
        auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    }

    std::filesystem::path path_;
    std::ifstream in_;
    std::vector<std::string> expected_;
    std::size_t line_no_ = 0;
};

}  // namespace

json model_to_json(const VariabilityModel& m) {
    json bias = json::object();
    for (const auto& [n_d, values] : m.bias_db.entries()) bias[std::to_string(n_d)] = values;
    return {
        {"format", kModelFormat},
        {"version", 1},
        {"range", {{"g_min_uS", m.range.g_min}, {"g_max_uS", m.range.g_max}}},
        {"std_model",
         {{"slope_pct_per_uS", m.std_model.slope}, {"intercept_pct", m.std_model.intercept}}},
        {"offset_model",
         {{"mu_off_pct", m.offset_model.mu_off}, {"sigma_off_pct", m.offset_model.sigma_off}}},
        {"bias_db", bias},
        {"stuck_model",
         {{"hrs_low_uS", m.stuck_model.hrs_low},
          {"hrs_high_uS", m.stuck_model.hrs_high},
          {"lrs_uS", m.stuck_model.lrs_samples}}},
    };
}

VariabilityModel model_from_json(const json& doc) {
    if (!doc.is_object()) throw ModelFormatError("model document must be a JSON object");
    if (auto it = doc.find("format"); it != doc.end() && *it != kModelFormat) {
        throw ModelFormatError("unexpected format tag " + it->dump());
    }
    VariabilityModel m;

    const auto& range = section(doc, "range");
    m.range.g_min = number(range, "range", "g_min_uS");
    m.range.g_max = number(range, "range", "g_max_uS");

    const auto& std_model = section(doc, "std_model");
    m.std_model.slope = number(std_model, "std_model", "slope_pct_per_uS");
    m.std_model.intercept = number(std_model, "std_model", "intercept_pct");

    const auto& offset = section(doc, "offset_model");
    m.offset_model.mu_off = number(offset, "offset_model", "mu_off_pct");
    m.offset_model.sigma_off = number(offset, "offset_model", "sigma_off_pct");

    const auto& bias = section(doc, "bias_db");
    std::map<std::uint32_t, std::vector<double>> entries;
    for (const auto& [key, value] : bias.items()) {
        std::uint32_t n_d = 0;
        auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), n_d);
        if (ec != std::errc() || ptr != key.data() + key.size()) {
            throw ModelFormatError("section 'bias_db': key '" + key +
                                   "' is not a non-negative integer");
        }
        entries[n_d] = number_list(value, "section 'bias_db' entry '" + key + "'");
    }

    const auto& stuck = section(doc, "stuck_model");
    m.stuck_model.hrs_low = number(stuck, "stuck_model", "hrs_low_uS");
    m.stuck_model.hrs_high = number(stuck, "stuck_model", "hrs_high_uS");
    auto lrs = stuck.find("lrs_uS");
    if (lrs == stuck.end()) throw ModelFormatError("section 'stuck_model': field 'lrs_uS' missing");
    m.stuck_model.lrs_samples = number_list(*lrs, "section 'stuck_model' field 'lrs_uS'");

    try {
        m.bias_db = BiasDisturbanceDb(std::move(entries));
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(std::string("invalid model: ") + e.what());
    }
    return m;
}

void save_model(const VariabilityModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << model_to_json(model).dump(1) << '\n';
}

VariabilityModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelFormatError("cannot open model file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ModelFormatError(path.string() + ": JSON parse error at byte " +
                               std::to_string(e.byte) + ": " + e.what());
    }
    try {
        return model_from_json(doc);
    } catch (const ModelFormatError& e) {
        throw ModelFormatError(path.string() + ": " + e.what());
    }
}

std::vector<TuningRecord> read_tuning_csv(const std::filesystem::path& path) {
    CsvReader csv(path, {"device_id", "g_target_uS", "read_uS"});
    std::map<std::pair<std::string, double>, std::vector<double>> groups;
    std::vector<std::pair<std::string, double>> order;
    std::vector<std::string> f;
    while (csv.next(f)) {
        if (f[0].empty()) csv.fail("field 'device_id' is empty");
        double target = csv.to_double(f[1], "g_target_uS");
        double read = csv.to_double(f[2], "read_uS");
        if (!(target > 0.0)) csv.fail("field 'g_target_uS' must be > 0");
        if (!(read > 0.0)) csv.fail("field 'read_uS' must be > 0");
        auto key = std::make_pair(f[0], target);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(read);
    }
    std::vector<TuningRecord> records;
    records.reserve(order.size());
    for (const auto& key : order) {
        records.push_back({key.first, key.second, std::move(groups[key])});
    }
    return records;
}

std::vector<BiasRecord> read_bias_csv(const std::filesystem::path& path) {
    CsvReader csv(path, {"n_d", "delta_g_uS"});
    std::vector<BiasRecord> out;
    std::vector<std::string> f;
    while (csv.next(f)) {
        out.push_back({csv.to_uint(f[0], "n_d"), csv.to_double(f[1], "delta_g_uS")});
    }
    return out;
}

StuckRecordings read_stuck_csv(const std::filesystem::path& path) {
    CsvReader csv(path, {"kind", "g_uS"});
    StuckRecordings out;
    std::vector<std::string> f;
    while (csv.next(f)) {
        double g = csv.to_double(f[1], "g_uS");
        if (f[0] == "HRS") {
            out.hrs.push_back(g);
        } else if (f[0] == "LRS") {
            out.lrs.push_back(g);
        } else {
            csv.fail("field 'kind' must be HRS or LRS, got '" + f[0] + "'");
        }
    }
    return out;
}

}  // namespace hwaware
