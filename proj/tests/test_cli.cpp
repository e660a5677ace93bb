#include "forge/experiment.hpp"

#include <cstdio>
#include <cstdlib>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace forge;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    const fs::path dir = fs::temp_directory_path() / "forge_cli_test";
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const std::string &name, const std::string &text) {
    const fs::path p = scratch() / name;
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome forge_cli(const std::string &args) {
    const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
    const std::string cmd = std::string(FORGE_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string config_error(const std::string &text) {
    try {
        parse_config(text, "t.yaml");
    } catch (const ConfigError &e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("minimal gap-sweep config gets defaults") {
    const auto c = parse_config("kind: gap-sweep\nn: 4\ndelta_e2: [0.001]\n");
    CHECK(c.kind == ExperimentKind::GapSweep);
    CHECK(c.ensemble.tag == Ensemble::Ginibre);
    CHECK(c.ensemble.sigma == 1.0);
    CHECK(c.steady_tol == 1e-8);
    CHECK(c.samples == 100);
    CHECK(c.m == 2);
    CHECK(c.epsilon == 0.1);
}

TEST_CASE("config errors") {
    auto msg = config_error("kind: gap-sweep\nn: 4\ndelta_e2: [0.9]\n");
    CHECK(msg.find("exceeds the bound 1 - 1/n") != std::string::npos);
    CHECK(msg.find("0.75") != std::string::npos);

    msg = config_error("kind: gap-sweep\nn: 4\nsamples: 3\nsamples: 5\n");
    CHECK(msg.find("duplicate key 'samples'") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("line 4") != std::string::npos);

    msg = config_error("kind: gap-sweep\nsample: 3\nwidth: 2\nsamples: 0\n");
    CHECK(msg.find("sample") != std::string::npos);
    CHECK(msg.find("width") != std::string::npos);
    CHECK(msg.find("samples") != std::string::npos);

    CHECK_FALSE(config_error("kind: nonsense\n").empty());
    CHECK_FALSE(config_error("kind: gap-sweep\nensemble: {kind: gue}\n").empty());
    CHECK_FALSE(config_error("kind: gap-sweep\nn: four\n").empty());
}

TEST_CASE("effective config round trips") {
    const auto c = parse_config("kind: spectrum\nn: 3\nm: 3\nseed: 12345678901234\ndelta_e2: [0.01, 0.02]\n");
    const auto again = parse_config(config_to_yaml(c));
    CHECK(config_to_yaml(again) == config_to_yaml(c));
    CHECK(again.seed == 12345678901234ULL);
    CHECK(again.delta_e2.size() == 2);
}

TEST_CASE("validate subcommand") {
    const auto good = write_file("good.yaml", "kind: gap-sweep\nn: 3\ndelta_e2: [0.01]\n");
    auto r = forge_cli("validate " + good.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("samples: 100") != std::string::npos);

    const auto bad = write_file("bad.yaml", "kind: gap-sweep\nn: 3\ndelta_e2: [0.9]\n");
    r = forge_cli("validate " + bad.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("1 - 1/n") != std::string::npos);

    r = forge_cli("validate " + (scratch() / "missing.yaml").string());
    CHECK(r.code == 1);
}

TEST_CASE("gap-sweep runs are deterministic across worker counts") {
    const auto cfg = write_file("sweep.yaml", "kind: gap-sweep\nn: 3\nm: 2\ndelta_e2: [0.01, 0.05]\nsamples: 4\nseed: 42\n");
    const fs::path a = scratch() / "run_a", b = scratch() / "run_b";
    fs::remove_all(a);
    fs::remove_all(b);
    auto r = forge_cli("run " + cfg.string() + " --workers 1 --out " + a.string());
    REQUIRE(r.code == 0);
    r = forge_cli("run " + cfg.string() + " --workers 3 --out " + b.string());
    REQUIRE(r.code == 0);
    const std::string csv = slurp(a / "gap-sweep.csv");
    CHECK(csv == slurp(b / "gap-sweep.csv"));
    CHECK(csv.rfind("seed,delta_e2_target,delta_e2_realized,gap,gamma_max,gamma_max_prime,haar_rate_exact,"
                    "haar_bound,symmetry_error,steady_count",
                    0) == 0);
    std::size_t lines = 0;
    for (char ch : csv)
        lines += ch == '\n' ? 1 : 0;
    CHECK(lines == 1 + 8);
    CHECK(fs::exists(a / "gap-sweep.json"));
    CHECK(fs::exists(a / "config.effective.yaml"));

    const fs::path c = scratch() / "run_c";
    fs::remove_all(c);
    r = forge_cli("run " + cfg.string() + " --seed 43 --out " + c.string());
    REQUIRE(r.code == 0);
    CHECK(slurp(c / "gap-sweep.csv") != csv);
}

TEST_CASE("spectrum of the xxz model reports midgap states") {
    const auto cfg = write_file("xxz.yaml", "kind: spectrum\nn: 2\nmodel: {type: xxz, j: 1.0, j_z: 0.0}\n"
                                            "delta_e2: [0.001]\n");
    const fs::path out = scratch() / "run_xxz";
    fs::remove_all(out);
    const auto r = forge_cli("run " + cfg.string() + " --out " + out.string());
    REQUIRE(r.code == 0);
    const std::string csv = slurp(out / "spectrum.csv");
    CHECK(csv.rfind("index,re_lambda,im_lambda,is_midgap,residual", 0) == 0);
    std::size_t lines = 0, midgap = 0;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        ++lines;
        std::istringstream fields(line);
        std::string f;
        for (int k = 0; k < 4; ++k)
            std::getline(fields, f, ',');
        midgap += f == "1" ? 1 : 0;
    }
    CHECK(lines == 256);
    CHECK(midgap == 2);
}

TEST_CASE("csv numbers round trip at 17 digits") {
    const auto cfg = write_file("haar.yaml", "kind: haar-rate\nn: 3\ndelta_e2: [0.02]\nsamples: 3\nseed: 5\n");
    const fs::path out = scratch() / "run_haar";
    fs::remove_all(out);
    REQUIRE(forge_cli("run " + cfg.string() + " --out " + out.string()).code == 0);
    std::istringstream in(slurp(out / "haar-rate.csv"));
    std::string line;
    std::getline(in, line);
    int checked = 0;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string f;
        while (std::getline(fields, f, ',')) {
            char *end = nullptr;
            const double x = std::strtod(f.c_str(), &end);
            // integer columns such as the seed are written as integers
            if (*end != '\0' || f.empty() || f.find_first_of(".e") == std::string::npos)
                continue;
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", x);
            CHECK(std::strtod(buf, nullptr) == x);
            CHECK(std::string(buf) == f);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("run with a bad config exits 1") {
    const auto cfg = write_file("bad_run.yaml", "kind: gap-sweep\nn: 3\nsamples: -1\n");
    CHECK(forge_cli("run " + cfg.string()).code == 1);
}
