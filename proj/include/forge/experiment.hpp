#pragma once

#include "forge/engineer.hpp"
#include "forge/parallel.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace forge {

enum class ExperimentKind { GapSweep, Spectrum, BoundAudit, HaarRate, Xxz, Ladder, Cqa, Uneven };

std::string_view kind_name(ExperimentKind k);

enum class GapMethod { Auto, Dense, Krylov };

struct ModelParams {
    std::string type = "engineered"; // engineered | xxz | ladder (spectrum kind only)
    double j = 1.0;
    double j_z = 0.0;
    std::optional<double> v; // set either v or delta_e2
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::GapSweep;
    int n = 2;
    int m = 2;
    EnsembleKind ensemble;
    std::vector<double> delta_e2{1e-3};
    int samples = 100;
    std::uint64_t seed = 0;
    ModelParams model;
    double steady_tol = kSteadyTol;
    double kernel_tol = linalg::kDefaultKernelTol;
    double epsilon = 0.1;
    int n_b = 0;          // uneven only
    double sigma_b = 0.0; // uneven only
    double midgap_fraction = kMidgapFractionDefault;
    GapMethod gap_method = GapMethod::Auto;
    std::string output = "forge_out";

    static constexpr double kMidgapFractionDefault = 0.1;
};

// Parses and checks a config. All problems are collected into one
// ConfigError. source names the input in messages.
ExperimentConfig parse_config(const std::string &text, const std::string &source = "<config>");
ExperimentConfig validate_config(const std::filesystem::path &path);

// Effective config as YAML, every field explicit.
std::string config_to_yaml(const ExperimentConfig &c);

struct RunOptions {
    std::optional<std::uint64_t> seed;
    unsigned workers = 0; // 0 = hardware concurrency
    std::optional<std::filesystem::path> out_dir;
};

// One realization of a gap sweep.
struct GapRow {
    std::uint64_t seed = 0;
    double delta_e2_target = 0.0;
    double delta_e2_realized = 0.0;
    double gap = 0.0;
    double gamma_max = 0.0;
    double gamma_max_prime = 0.0;
    double haar_rate_exact = 0.0;
    double haar_bound = 0.0;
    double symmetry_error = 0.0;
    int steady_count = 0;
    std::string status = "ok";
};

// Gap of an engineered Lindbladian whose steady state is psi.
SpectrumResult engineered_gap(const Lindbladian &l, const ComplexVector &psi, GapMethod method, double tol);

GapRow gap_realization(const ExperimentConfig &c, std::size_t target_index, std::size_t realization);
std::vector<GapRow> run_gap_sweep(const ExperimentConfig &c, unsigned workers);

struct RunResult {
    int exit_code = 0;
    std::size_t rows = 0;
    std::size_t failed_rows = 0;
    std::filesystem::path csv;
    std::filesystem::path sidecar;
    std::filesystem::path config_echo;
};

RunResult run_experiment(const ExperimentConfig &c, const RunOptions &opts);

} // namespace forge
