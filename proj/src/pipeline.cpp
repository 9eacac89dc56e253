#include "hwaware/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "hwaware/model_io.hpp"

namespace hwaware {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (!known.count(key)) throw InputError("config: unknown key '" + where + key + "'");
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw InputError("config: '" + where + key + "' has the wrong type");
    }
}

const json& object_at(const json& obj, const char* key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_object()) throw InputError("config: '" + where + key + "' must be an object");
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
    if (!doc.is_object()) throw InputError("config: top level must be a JSON object");
    reject_unknown(doc,
                   {"seed", "epochs", "batch_size", "lr", "architecture", "hrs_fraction",
                    "lrs_fraction", "sources", "tile", "model_path", "model_seed", "dataset",
                    "evaluation", "heatmap", "threads"},
                   "");
    ExperimentConfig c;
    auto& t = c.training;
    read(doc, "seed", t.seed, "");
    read(doc, "epochs", t.epochs, "");
    read(doc, "batch_size", t.batch_size, "");
    read(doc, "lr", t.lr, "");
    read(doc, "architecture", t.widths, "");
    read(doc, "hrs_fraction", t.transfer.hrs_fraction, "");
    read(doc, "lrs_fraction", t.transfer.lrs_fraction, "");
    read(doc, "model_seed", c.model_seed, "");
    read(doc, "threads", c.threads, "");
    if (doc.contains("sources")) {
        const auto& s = object_at(doc, "sources", "");
        reject_unknown(s, {"tuning", "bias", "stuck"}, "sources.");
        read(s, "tuning", t.transfer.tuning, "sources.");
        read(s, "bias", t.transfer.bias, "sources.");
        read(s, "stuck", t.transfer.stuck, "sources.");
    }
    if (doc.contains("tile")) {
        const auto& s = object_at(doc, "tile", "");
        reject_unknown(s, {"rows", "cols"}, "tile.");
        read(s, "rows", t.tile_rows, "tile.");
        read(s, "cols", t.tile_cols, "tile.");
    }
    if (auto it = doc.find("model_path"); it != doc.end() && !it->is_null()) {
        if (!it->is_string()) throw InputError("config: 'model_path' must be a string or null");
        c.model_path = it->get<std::string>();
    }
    if (doc.contains("dataset")) {
        const auto& s = object_at(doc, "dataset", "");
        reject_unknown(s, {"n_train", "n_test", "noise_std", "seed"}, "dataset.");
        read(s, "n_train", c.dataset.n_train, "dataset.");
        read(s, "n_test", c.dataset.n_test, "dataset.");
        read(s, "noise_std", c.dataset.noise_std, "dataset.");
        read(s, "seed", c.dataset.seed, "dataset.");
    }
    if (doc.contains("evaluation")) {
        const auto& s = object_at(doc, "evaluation", "");
        reject_unknown(s, {"transfers", "seed"}, "evaluation.");
        read(s, "transfers", c.transfers, "evaluation.");
        read(s, "seed", c.eval_seed, "evaluation.");
    }
    if (doc.contains("heatmap")) {
        const auto& s = object_at(doc, "heatmap", "");
        reject_unknown(s, {"enabled", "repetitions", "nx", "ny", "x_min", "x_max", "y_min", "y_max"},
                       "heatmap.");
        auto& h = c.heatmap;
        read(s, "enabled", h.enabled, "heatmap.");
        read(s, "repetitions", h.repetitions, "heatmap.");
        read(s, "nx", h.grid.nx, "heatmap.");
        read(s, "ny", h.grid.ny, "heatmap.");
        read(s, "x_min", h.grid.x_min, "heatmap.");
        read(s, "x_max", h.grid.x_max, "heatmap.");
        read(s, "y_min", h.grid.y_min, "heatmap.");
        read(s, "y_max", h.grid.y_max, "heatmap.");
    }

    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    if (t.widths.front() != 2 || t.widths.back() != 1) {
        throw InputError("config: architecture must start with 2 inputs and end with 1 output");
    }
    if (c.dataset.n_train == 0 || c.dataset.n_test == 0) {
        throw InputError("config: dataset sizes must be positive");
    }
    if (!(c.dataset.noise_std >= 0.0)) throw InputError("config: dataset.noise_std must be >= 0");
    if (c.transfers == 0) throw InputError("config: evaluation.transfers must be >= 1");
    if (c.heatmap.enabled && (c.heatmap.repetitions == 0 || c.heatmap.grid.nx == 0 ||
                              c.heatmap.grid.ny == 0)) {
        throw InputError("config: heatmap needs repetitions, nx and ny >= 1");
    }
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    const auto& t = c.training;
    const auto& g = c.heatmap.grid;
    return {
        {"seed", t.seed},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"lr", t.lr},
        {"architecture", t.widths},
        {"hrs_fraction", t.transfer.hrs_fraction},
        {"lrs_fraction", t.transfer.lrs_fraction},
        {"sources", {{"tuning", t.transfer.tuning}, {"bias", t.transfer.bias}, {"stuck", t.transfer.stuck}}},
        {"tile", {{"rows", t.tile_rows}, {"cols", t.tile_cols}}},
        {"model_path", c.model_path ? json(c.model_path->string()) : json(nullptr)},
        {"model_seed", c.model_seed},
        {"dataset",
         {{"n_train", c.dataset.n_train},
          {"n_test", c.dataset.n_test},
          {"noise_std", c.dataset.noise_std},
          {"seed", c.dataset.seed}}},
        {"evaluation", {{"transfers", c.transfers}, {"seed", c.eval_seed}}},
        {"heatmap",
         {{"enabled", c.heatmap.enabled},
          {"repetitions", c.heatmap.repetitions},
          {"nx", g.nx},
          {"ny", g.ny},
          {"x_min", g.x_min},
          {"x_max", g.x_max},
          {"y_min", g.y_min},
          {"y_max", g.y_max}}},
        {"threads", c.threads},
    };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    ExperimentConfig c = config_from_json(doc);
    if (c.model_path && c.model_path->is_relative()) {
        c.model_path = path.parent_path() / *c.model_path;
    }
    return c;
}

VariabilityModel resolve_model(const ExperimentConfig& config) {
    if (!config.model_path) return make_synthetic_model(config.model_seed);
    if (!std::filesystem::exists(*config.model_path)) {
        throw InputError("model file not found: " + config.model_path->string());
    }
    try {
        return load_model(*config.model_path);
    } catch (const ModelFormatError& e) {
        throw InputError(e.what());
    }
}

std::pair<LabeledSet, LabeledSet> make_dataset(const DatasetOptions& o) {
    return split(make_half_moons(o.n_train + o.n_test, o.noise_std, o.seed), o.n_train);
}

std::string config_hash(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config_to_json(config).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_report_json(const RobustnessReport& report, const LabeledSet& test_set,
                       const std::filesystem::path& path) {
    json points = json::array();
    for (std::size_t i = 0; i < report.size(); ++i) {
        points.push_back({{"x", test_set.points(i, 0)},
                          {"y", test_set.points(i, 1)},
                          {"label", int(test_set.labels[i])},
                          {"correct", report.correct[i]},
                          {"fraction", report.fraction(i)}});
    }
    auto out = open_out(path);
    out << json{{"transfers", report.transfers}, {"points", points}}.dump(1) << '\n';
}

void write_table_csv(const RobustnessReport& report, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "bin,label,count,percent\n";
    const auto bins = robustness_table(report);
    for (std::size_t b = 0; b < bins.size(); ++b) {
        out << b << ',' << bins[b].label << ',' << bins[b].count << ',' << fmt(bins[b].percent) << '\n';
    }
}

void write_curve_csv(const RobustnessReport& report, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "threshold,share\n";
    for (const auto& p : robustness_curve(report)) out << fmt(p.threshold) << ',' << fmt(p.share) << '\n';
}

void write_heatmap_csv(const HeatmapGrid& grid, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "x,y,mean,std\n";
    for (std::size_t j = 0; j < grid.spec.ny; ++j) {
        for (std::size_t i = 0; i < grid.spec.nx; ++i) {
            out << fmt(grid.spec.x_at(i)) << ',' << fmt(grid.spec.y_at(j)) << ','
                << fmt(grid.mean(j, i)) << ',' << fmt(grid.std(j, i)) << '\n';
        }
    }
}

ExperimentSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    const VariabilityModel model = resolve_model(config);
    const auto [train_set, test_set] = make_dataset(config.dataset);

    const auto hann = train_hardware_aware(config.training, train_set, model);
    const auto nn = train_regular(config.training, train_set);

    ExperimentSummary summary;
    summary.hann_clean_test_accuracy = accuracy(hann.net, test_set);
    summary.nn_clean_test_accuracy = accuracy(nn.net, test_set);
    summary.hann_mean_stuck_fraction = hann.mean_stuck_fraction;

    json networks = json::object();
    auto emit = [&](const char* name, const DenseNet& net, double& share_95) {
        const auto dir = out_dir / name;
        std::filesystem::create_directories(dir);
        const auto layouts = layouts_for(net, config.training.tile_rows, config.training.tile_cols);
        // Both networks see the same transfer streams.
        const auto report = evaluate_transfers(net, model, layouts, config.training.transfer, test_set,
                                               config.transfers, config.eval_seed, config.threads);
        share_95 = share_at_least(report, 950);
        save_net(net, dir / "network.json");
        write_report_json(report, test_set, dir / "report.json");
        write_table_csv(report, dir / "table.csv");
        write_curve_csv(report, dir / "curve.csv");
        if (config.heatmap.enabled) {
            const auto grid = heatmap(net, model, layouts, config.training.transfer, config.heatmap.grid,
                                      config.heatmap.repetitions, config.eval_seed, config.threads);
            write_heatmap_csv(grid, dir / "heatmap.csv");
        }
        networks[name] = {{"clean_test_accuracy", accuracy(net, test_set)},
                          {"share_correct_ge_95pct", share_95}};
    };
    emit("hann", hann.net, summary.hann_share_95);
    emit("nn", nn.net, summary.nn_share_95);
    networks["hann"]["mean_stuck_fraction_per_layer"] = hann.mean_stuck_fraction;

    json manifest = {
        {"tool", "hwaware"},
        {"version", kToolVersion},
        {"config_hash", config_hash(config)},
        {"config", config_to_json(config)},
        {"seeds",
         {{"training", config.training.seed},
          {"dataset", config.dataset.seed},
          {"evaluation", config.eval_seed},
          {"model", config.model_path ? json(nullptr) : json(config.model_seed)}}},
        {"model", config.model_path ? config.model_path->string() : std::string("synthetic")},
        {"networks", networks},
    };
    auto out = open_out(out_dir / "manifest.json");
    out << manifest.dump(1) << '\n';
    return summary;
}

}  // namespace hwaware
