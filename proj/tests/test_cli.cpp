#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int status;
    std::string err;
    std::string out;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("hwaware_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Run run(const std::string& args) {
    const auto out = scratch() / "stdout.txt";
    const auto err = scratch() / "stderr.txt";
    const std::string cmd = std::string(HWAWARE_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(err), slurp(out)};
}

fs::path write(const std::string& name, const std::string& content) {
    std::ofstream(scratch() / name) << content;
    return scratch() / name;
}

const char* kSmallConfig = R"({
  "epochs": 30,
  "evaluation": {"transfers": 20, "seed": 5},
  "heatmap": {"nx": 8, "ny": 6, "repetitions": 4}
})";

}  // namespace

TEST_CASE("version and help") {
    CHECK(run("--version").status == 0);
    CHECK(run("--help").status == 0);
    CHECK(run("").status != 0);
}

TEST_CASE("run twice with one config gives byte-identical artifacts") {
    auto cfg = write("small.json", kSmallConfig);
    REQUIRE(run("run --config " + cfg.string() + " --out " + (scratch() / "r1").string()).status == 0);
    auto second = run("run --config " + cfg.string() + " --out " + (scratch() / "r2").string());
    REQUIRE(second.status == 0);
    CHECK(second.out.find("clean test accuracy") != std::string::npos);
    for (const auto& entry : fs::recursive_directory_iterator(scratch() / "r1")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), scratch() / "r1");
        INFO(rel.string());
        CHECK(slurp(entry.path()) == slurp(scratch() / "r2" / rel));
    }
}

TEST_CASE("missing model file exits with status 2 and names the path") {
    auto cfg = write("missing_model.json", R"({"epochs": 2, "model_path": "/no/such/model.json"})");
    auto r = run("run --config " + cfg.string() + " --out " + (scratch() / "rm").string());
    CHECK(r.status == 2);
    CHECK(r.err.find("/no/such/model.json") != std::string::npos);
}

TEST_CASE("invalid configs are rejected") {
    auto unknown = write("unknown.json", R"({"epoch": 2})");
    CHECK(run("run --config " + unknown.string() + " --out " + (scratch() / "ru").string()).status == 2);
    auto broken = write("broken.json", R"({"epochs": )");
    CHECK(run("run --config " + broken.string() + " --out " + (scratch() / "rb").string()).status == 2);
    CHECK(run("run --config " + (scratch() / "absent.json").string() + " --out x").status == 2);
}

TEST_CASE("model, train, evaluate and heatmap subcommands chain together") {
    const auto model = scratch() / "model.json";
    REQUIRE(run("gen-synthetic-model --seed 3 --out " + model.string()).status == 0);
    auto cfg = write("chain.json", std::string(R"({"epochs": 20, "model_path": ")") + model.string() +
                                       R"(", "evaluation": {"transfers": 10}, "heatmap": {"nx": 4, "ny": 4}})");
    const auto net = scratch() / "net.json";
    auto trained = run("train --hardware-aware --config " + cfg.string() + " --out " + net.string());
    REQUIRE(trained.status == 0);
    CHECK(trained.out.find("stuck-affected") != std::string::npos);
    REQUIRE(run("evaluate --config " + cfg.string() + " --network " + net.string() + " --threads 2 --out " +
                (scratch() / "eval").string()).status == 0);
    CHECK(fs::exists(scratch() / "eval" / "table.csv"));
    REQUIRE(run("heatmap --config " + cfg.string() + " --network " + net.string() +
                " --repetitions 3 --out " + (scratch() / "heat").string()).status == 0);
    CHECK(fs::exists(scratch() / "heat" / "heatmap.csv"));
    CHECK(run("train --regular --hardware-aware --out x").status != 0);
}

TEST_CASE("fit-model builds a loadable model from raw CSVs") {
    std::ostringstream tuning;
    tuning << "device_id,g_target_uS,read_uS\n";
    for (int dev = 0; dev < 4; ++dev) {
        for (int level : {120, 250, 380}) {
            for (int k = 0; k < 6; ++k) {
                tuning << "d" << dev << ',' << level << ',' << level * (1.0 + 0.004 * (k - 2.5) - 0.001 * dev)
                       << '\n';
            }
        }
    }
    auto t = write("tuning.csv", tuning.str());
    auto b = write("bias.csv", "n_d,delta_g_uS\n1,-0.4\n1,-0.1\n5,-2\n5,75\n");
    auto s = write("stuck.csv", "kind,g_uS\nHRS,30\nHRS,50\nHRS,70\nLRS,700\nLRS,900\n");
    const auto out = scratch() / "fitted.json";
    auto r = run("fit-model --tuning " + t.string() + " --bias " + b.string() + " --stuck " + s.string() +
                 " --out " + out.string());
    REQUIRE(r.status == 0);
    auto doc = nlohmann::json::parse(slurp(out));
    CHECK(doc.at("stuck_model").at("lrs_uS").size() == 2);
    CHECK(doc.at("bias_db").at("5").size() == 1);

    auto bad = write("bad_bias.csv", "n_d,delta_g_uS\n1,abc\n");
    CHECK(run("fit-model --tuning " + t.string() + " --bias " + bad.string() + " --stuck " + s.string() +
              " --out " + out.string()).status == 2);
}
