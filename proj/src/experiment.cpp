#include "forge/experiment.hpp"

#include "forge/bounds.hpp"
#include "forge/models.hpp"

#include <json.hpp>

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <spdlog/spdlog.h>
#include <sstream>
#include <yaml-cpp/yaml.h>

namespace forge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char *kVersion = "0.1.0";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::pair<ExperimentKind, std::string_view>> &kind_table() {
    static const std::vector<std::pair<ExperimentKind, std::string_view>> t{
        {ExperimentKind::GapSweep, "gap-sweep"}, {ExperimentKind::Spectrum, "spectrum"},
        {ExperimentKind::BoundAudit, "bound-audit"}, {ExperimentKind::HaarRate, "haar-rate"},
        {ExperimentKind::Xxz, "xxz"}, {ExperimentKind::Ladder, "ladder"},
        {ExperimentKind::Cqa, "cqa"}, {ExperimentKind::Uneven, "uneven"}};
    return t;
}

std::string_view gap_method_name(GapMethod g) {
    switch (g) {
    case GapMethod::Auto:
        return "auto";
    case GapMethod::Dense:
        return "dense";
    case GapMethod::Krylov:
        return "krylov";
    }
    return "?";
}

bool chain_kind(ExperimentKind k) { return k == ExperimentKind::Xxz || k == ExperimentKind::Ladder; }

// Collects problems while walking the YAML tree.
class Checker {
public:
    explicit Checker(std::string source) : source_(std::move(source)) {}

    void issue(const YAML::Node &at, const std::string &msg) {
        if (at.IsDefined() && at.Mark().line >= 0)
            issues_.push_back(fmt::format("{}:{}: {}", source_, at.Mark().line + 1, msg));
        else
            issues_.push_back(fmt::format("{}: {}", source_, msg));
    }
    void issue(const std::string &msg) { issues_.push_back(fmt::format("{}: {}", source_, msg)); }

    // Reports unknown and duplicate keys of a mapping. Returns false when the
    // node is not a mapping.
    bool check_map(const YAML::Node &node, const std::string &path, const std::set<std::string> &allowed) {
        if (!node.IsMap()) {
            issue(node, fmt::format("{} must be a mapping", path.empty() ? "document" : path));
            return false;
        }
        std::map<std::string, int> seen;
        for (auto it = node.begin(); it != node.end(); ++it) {
            const auto key = it->first.as<std::string>();
            const int line = it->first.Mark().line + 1;
            const std::string full = path.empty() ? key : path + "." + key;
            if (auto prev = seen.find(key); prev != seen.end())
                issue(fmt::format("duplicate key '{}' at line {} and line {}", full, prev->second, line));
            else
                seen.emplace(key, line);
            if (!allowed.count(key))
                issue(it->first, fmt::format("unknown key '{}'", full));
        }
        return true;
    }

    template <class T> std::optional<T> get(const YAML::Node &parent, const char *key, const std::string &path) {
        const YAML::Node n = parent[key];
        if (!n.IsDefined() || n.IsNull())
            return std::nullopt;
        try {
            return n.as<T>();
        } catch (const YAML::Exception &) {
            issue(n, fmt::format("'{}' has an invalid value '{}'", path, n.IsScalar() ? n.Scalar() : "<non-scalar>"));
            return std::nullopt;
        }
    }

    const std::vector<std::string> &issues() const { return issues_; }

private:
    std::string source_;
    std::vector<std::string> issues_;
};

double max_delta_for(const ExperimentConfig &c) {
    if (chain_kind(c.kind) || (c.kind == ExperimentKind::Spectrum && c.model.type != "engineered"))
        return 1.0 - std::ldexp(1.0, -c.n);
    return 1.0 - 1.0 / static_cast<double>(c.n);
}

bool chain_model(const ExperimentConfig &c) {
    return chain_kind(c.kind) || (c.kind == ExperimentKind::Spectrum && c.model.type != "engineered");
}

void check_ranges(const ExperimentConfig &c, Checker &chk) {
    if (chain_model(c)) {
        if (c.n < 1 || c.n > 3)
            chk.issue(fmt::format("n = {} outside [1, 3] for chain models", c.n));
    } else if (c.kind == ExperimentKind::Uneven) {
        if (c.n < 1)
            chk.issue(fmt::format("n = {} must be at least 1", c.n));
        if (c.n_b <= c.n)
            chk.issue(fmt::format("n_b = {} must exceed n = {} for uneven runs", c.n_b, c.n));
        if (static_cast<long>(c.n) * c.n_b > kMaxHilbertDim)
            chk.issue(fmt::format("n * n_b = {} exceeds the dense limit {}", c.n * c.n_b, kMaxHilbertDim));
        if (!(c.sigma_b >= 0.0))
            chk.issue(fmt::format("sigma_b = {} must be non-negative", c.sigma_b));
    } else {
        if (c.n < 2 || c.n > 8)
            chk.issue(fmt::format("n = {} outside [2, 8]", c.n));
    }
    if (c.m < 1)
        chk.issue(fmt::format("m = {} must be at least 1", c.m));
    if (c.samples < 1)
        chk.issue(fmt::format("samples = {} must be at least 1", c.samples));
    if (!(c.ensemble.sigma > 0.0) || !std::isfinite(c.ensemble.sigma))
        chk.issue(fmt::format("ensemble.sigma = {} must be positive", c.ensemble.sigma));
    if (!(c.steady_tol > 0.0))
        chk.issue("tolerances.steady must be positive");
    if (!(c.kernel_tol > 0.0))
        chk.issue("tolerances.kernel must be positive");
    if (!(c.epsilon > 0.0 && c.epsilon < 1.0))
        chk.issue(fmt::format("epsilon = {} outside (0, 1)", c.epsilon));
    if (!(c.midgap_fraction > 0.0 && c.midgap_fraction < 1.0))
        chk.issue(fmt::format("midgap_fraction = {} outside (0, 1)", c.midgap_fraction));
    if (c.delta_e2.empty() && !(chain_model(c) && c.model.v))
        chk.issue("delta_e2 needs at least one target");
    if (c.n >= 1 && c.n <= 8) {
        const double hi = max_delta_for(c);
        const char *bound = chain_model(c) ? "1 - 2^-n" : "1 - 1/n";
        for (std::size_t k = 0; k < c.delta_e2.size(); ++k) {
            const double d = c.delta_e2[k];
            if (!(d >= 0.0))
                chk.issue(fmt::format("delta_e2[{}] = {} is negative", k, d));
            else if (d > hi || (chain_model(c) && d >= hi))
                chk.issue(fmt::format("delta_e2[{}] = {} exceeds the bound {} = {}", k, d, bound, hi));
        }
    }
    if (c.model.v && !(*c.model.v >= 0.0 && *c.model.v <= 1.0))
        chk.issue(fmt::format("model.v = {} outside [0, 1]", *c.model.v));
    if (c.kind == ExperimentKind::Cqa && c.ensemble.tag != Ensemble::DetailedBalance)
        chk.issue("cqa runs need ensemble.kind = detailed_balance");
    if (c.kind == ExperimentKind::Cqa && c.n > 6)
        chk.issue(fmt::format("n = {} too large for cqa (full spectra of both generators); use n <= 6", c.n));
}

} // namespace

std::string_view kind_name(ExperimentKind k) {
    for (const auto &[kind, name] : kind_table())
        if (kind == k)
            return name;
    return "?";
}

ExperimentConfig parse_config(const std::string &text, const std::string &source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception &e) {
        throw ConfigError(fmt::format("{}:{}: YAML syntax error: {}", source, e.mark.line + 1, e.msg));
    }
    Checker chk(source);
    ExperimentConfig c;
    if (!root.IsDefined() || root.IsNull())
        throw ConfigError(fmt::format("{}: empty config", source));
    if (!chk.check_map(root, "",
                       {"kind", "n", "m", "ensemble", "delta_e2", "samples", "seed", "model", "tolerances", "epsilon",
                        "n_b", "sigma_b", "midgap_fraction", "gap_method", "output"})) {
        std::string all;
        for (const auto &s : chk.issues())
            all += s + "\n";
        throw ConfigError(all);
    }

    if (auto kind = chk.get<std::string>(root, "kind", "kind")) {
        bool found = false;
        for (const auto &[k, name] : kind_table())
            if (name == *kind) {
                c.kind = k;
                found = true;
            }
        if (!found)
            chk.issue(root["kind"], fmt::format("unknown kind '{}'", *kind));
    } else if (!root["kind"].IsDefined()) {
        chk.issue("missing required key 'kind'");
    }

    c.n = chain_kind(c.kind) ? 2 : 4;
    if (auto v = chk.get<int>(root, "n", "n"))
        c.n = *v;
    if (auto v = chk.get<int>(root, "m", "m"))
        c.m = *v;
    if (auto v = chk.get<int>(root, "samples", "samples"))
        c.samples = *v;
    if (root["seed"].IsDefined()) {
        const auto &node = root["seed"];
        const std::string s = node.IsScalar() ? node.Scalar() : "";
        try {
            std::size_t used = 0;
            if (s.empty() || s[0] == '-')
                throw std::invalid_argument(s);
            c.seed = std::stoull(s, &used, 0);
            if (used != s.size())
                throw std::invalid_argument(s);
        } catch (const std::exception &) {
            chk.issue(node, fmt::format("'seed' must be an unsigned 64-bit integer, got '{}'", s));
        }
    }
    if (auto v = chk.get<double>(root, "epsilon", "epsilon"))
        c.epsilon = *v;
    if (auto v = chk.get<int>(root, "n_b", "n_b"))
        c.n_b = *v;
    if (auto v = chk.get<double>(root, "sigma_b", "sigma_b"))
        c.sigma_b = *v;
    if (auto v = chk.get<double>(root, "midgap_fraction", "midgap_fraction"))
        c.midgap_fraction = *v;
    if (auto v = chk.get<std::string>(root, "output", "output"))
        c.output = *v;
    if (auto v = chk.get<std::string>(root, "gap_method", "gap_method")) {
        if (*v == "auto")
            c.gap_method = GapMethod::Auto;
        else if (*v == "dense")
            c.gap_method = GapMethod::Dense;
        else if (*v == "krylov")
            c.gap_method = GapMethod::Krylov;
        else
            chk.issue(root["gap_method"], fmt::format("gap_method '{}' is not auto, dense or krylov", *v));
    }

    if (const auto d = root["delta_e2"]; d.IsDefined()) {
        c.delta_e2.clear();
        if (d.IsScalar()) {
            if (auto v = chk.get<double>(root, "delta_e2", "delta_e2"))
                c.delta_e2.push_back(*v);
        } else if (d.IsSequence()) {
            for (std::size_t k = 0; k < d.size(); ++k) {
                try {
                    c.delta_e2.push_back(d[k].as<double>());
                } catch (const YAML::Exception &) {
                    chk.issue(d[k], fmt::format("delta_e2[{}] is not a number", k));
                }
            }
        } else {
            chk.issue(d, "delta_e2 must be a number or a list of numbers");
        }
    }

    bool ensemble_kind_given = false;
    if (const auto e = root["ensemble"]; e.IsDefined()) {
        if (chk.check_map(e, "ensemble", {"kind", "sigma"})) {
            if (auto v = chk.get<std::string>(e, "kind", "ensemble.kind")) {
                try {
                    c.ensemble.tag = parse_ensemble(*v);
                    ensemble_kind_given = true;
                } catch (const PreconditionError &err) {
                    chk.issue(e["kind"], err.what());
                }
            }
            if (auto v = chk.get<double>(e, "sigma", "ensemble.sigma"))
                c.ensemble.sigma = *v;
        }
    }
    if (c.kind == ExperimentKind::Cqa && !ensemble_kind_given)
        c.ensemble.tag = Ensemble::DetailedBalance;

    if (const auto mdl = root["model"]; mdl.IsDefined()) {
        if (chk.check_map(mdl, "model", {"type", "j", "j_z", "v"})) {
            if (auto v = chk.get<std::string>(mdl, "type", "model.type")) {
                if (*v == "engineered" || *v == "xxz" || *v == "ladder")
                    c.model.type = *v;
                else
                    chk.issue(mdl["type"], fmt::format("model.type '{}' is not engineered, xxz or ladder", *v));
            }
            if (auto v = chk.get<double>(mdl, "j", "model.j"))
                c.model.j = *v;
            if (auto v = chk.get<double>(mdl, "j_z", "model.j_z"))
                c.model.j_z = *v;
            if (auto v = chk.get<double>(mdl, "v", "model.v"))
                c.model.v = *v;
        }
    }
    if (c.kind == ExperimentKind::Xxz)
        c.model.type = "xxz";
    if (c.kind == ExperimentKind::Ladder)
        c.model.type = "ladder";

    if (const auto t = root["tolerances"]; t.IsDefined()) {
        if (chk.check_map(t, "tolerances", {"steady", "kernel"})) {
            if (auto v = chk.get<double>(t, "steady", "tolerances.steady"))
                c.steady_tol = *v;
            if (auto v = chk.get<double>(t, "kernel", "tolerances.kernel"))
                c.kernel_tol = *v;
        }
    }

    check_ranges(c, chk);
    if (!chk.issues().empty()) {
        std::string all = fmt::format("{} problem(s) in config:\n", chk.issues().size());
        for (const auto &s : chk.issues())
            all += "  " + s + "\n";
        throw ConfigError(all);
    }
    return c;
}

ExperimentConfig validate_config(const fs::path &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

namespace {

json config_to_json(const ExperimentConfig &c) {
    json j;
    j["kind"] = kind_name(c.kind);
    j["n"] = c.n;
    j["m"] = c.m;
    j["ensemble"] = {{"kind", ensemble_name(c.ensemble.tag)}, {"sigma", c.ensemble.sigma}};
    j["delta_e2"] = c.delta_e2;
    j["samples"] = c.samples;
    j["seed"] = c.seed;
    j["model"] = {{"type", c.model.type}, {"j", c.model.j}, {"j_z", c.model.j_z}};
    if (c.model.v)
        j["model"]["v"] = *c.model.v;
    j["tolerances"] = {{"steady", c.steady_tol}, {"kernel", c.kernel_tol}};
    j["epsilon"] = c.epsilon;
    j["n_b"] = c.n_b;
    j["sigma_b"] = c.sigma_b;
    j["midgap_fraction"] = c.midgap_fraction;
    j["gap_method"] = gap_method_name(c.gap_method);
    j["output"] = c.output;
    return j;
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

} // namespace

std::string config_to_yaml(const ExperimentConfig &c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << std::string(kind_name(c.kind));
    out << YAML::Key << "n" << YAML::Value << c.n;
    out << YAML::Key << "m" << YAML::Value << c.m;
    out << YAML::Key << "ensemble" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << std::string(ensemble_name(c.ensemble.tag));
    out << YAML::Key << "sigma" << YAML::Value << c.ensemble.sigma;
    out << YAML::EndMap;
    out << YAML::Key << "delta_e2" << YAML::Value << YAML::Flow << c.delta_e2;
    out << YAML::Key << "samples" << YAML::Value << c.samples;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "type" << YAML::Value << c.model.type;
    out << YAML::Key << "j" << YAML::Value << c.model.j;
    out << YAML::Key << "j_z" << YAML::Value << c.model.j_z;
    if (c.model.v)
        out << YAML::Key << "v" << YAML::Value << *c.model.v;
    out << YAML::EndMap;
    out << YAML::Key << "tolerances" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "steady" << YAML::Value << c.steady_tol;
    out << YAML::Key << "kernel" << YAML::Value << c.kernel_tol;
    out << YAML::EndMap;
    out << YAML::Key << "epsilon" << YAML::Value << c.epsilon;
    out << YAML::Key << "n_b" << YAML::Value << c.n_b;
    out << YAML::Key << "sigma_b" << YAML::Value << c.sigma_b;
    out << YAML::Key << "midgap_fraction" << YAML::Value << c.midgap_fraction;
    out << YAML::Key << "gap_method" << YAML::Value << std::string(gap_method_name(c.gap_method));
    out << YAML::Key << "output" << YAML::Value << c.output;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

SpectrumResult engineered_gap(const Lindbladian &l, const ComplexVector &psi, GapMethod method, double tol) {
    const Index d2 = l.dim() * l.dim();
    const bool dense = method == GapMethod::Dense || (method == GapMethod::Auto && d2 <= 256);
    if (dense)
        return spectrum(l, tol);
    return slow_spectrum(l, psi, 8, tol);
}

namespace {

SchmidtState draw_state(const ExperimentConfig &c, double target, Rng &rng) {
    return sample_schmidt_fixed_e2(c.n, target, rng);
}

std::string status_of(const SpectrumResult &r) { return r.flagged ? "flagged: residual" : "ok"; }

} // namespace

GapRow gap_realization(const ExperimentConfig &c, std::size_t ti, std::size_t r) {
    GapRow row;
    row.seed = sub_seed(c.seed, ti, r);
    row.delta_e2_target = c.delta_e2[ti];
    try {
        Rng rng(row.seed);
        const SchmidtState state = draw_state(c, row.delta_e2_target, rng);
        row.delta_e2_realized = measures(state).delta_e2;
        const Lindbladian l = engineered_lindbladian(state, c.m, c.ensemble, rng);
        const ComplexVector psi = state.to_vector();
        const auto spec = engineered_gap(l, psi, c.gap_method, c.steady_tol);
        row.gap = spec.gap;
        row.steady_count = spec.steady_count;
        row.gamma_max = gamma_max(l, state);
        row.gamma_max_prime = gamma_max_prime(l, state);
        row.haar_rate_exact = haar_rate_exact(l, state).value();
        row.haar_bound = haar_bound(l, state);
        row.symmetry_error = strong_symmetry_check(l, psi).symmetry_error;
        row.status = status_of(spec);
    } catch (const std::exception &e) {
        row.gap = row.gamma_max = row.gamma_max_prime = row.haar_rate_exact = row.haar_bound = row.symmetry_error =
            kNaN;
        row.status = fmt::format("error: {}", e.what());
    }
    return row;
}

std::vector<GapRow> run_gap_sweep(const ExperimentConfig &c, unsigned workers) {
    const auto per = static_cast<std::size_t>(c.samples);
    return parallel_map(c.delta_e2.size() * per, workers,
                        [&](std::size_t k) { return gap_realization(c, k / per, k % per); });
}

namespace {

// A table whose rows are already formatted, plus a failure flag per row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<bool> failed;
    json summary = json::object();
};

std::string csv_field(const std::string &s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    return out + "\"";
}

struct Stats {
    std::size_t count = 0;
    double mean = kNaN;
    double std = kNaN;
};

Stats stats_of(const std::vector<double> &xs) {
    Stats s;
    std::vector<double> ok;
    for (double x : xs)
        if (std::isfinite(x))
            ok.push_back(x);
    s.count = ok.size();
    if (ok.empty())
        return s;
    s.mean = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
    if (ok.size() > 1) {
        double ss = 0.0;
        for (double x : ok)
            ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(ok.size() - 1));
    }
    return s;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

Table gap_sweep_table(const ExperimentConfig &c, unsigned workers) {
    const auto rows = run_gap_sweep(c, workers);
    Table t;
    t.header = {"seed", "delta_e2_target", "delta_e2_realized", "gap", "gamma_max", "gamma_max_prime",
                "haar_rate_exact", "haar_bound", "symmetry_error", "steady_count", "status"};
    for (const auto &r : rows) {
        t.rows.push_back({std::to_string(r.seed), num(r.delta_e2_target), num(r.delta_e2_realized), num(r.gap),
                          num(r.gamma_max), num(r.gamma_max_prime), num(r.haar_rate_exact), num(r.haar_bound),
                          num(r.symmetry_error), std::to_string(r.steady_count), r.status});
        t.failed.push_back(r.status.rfind("error", 0) == 0);
    }
    json targets = json::array();
    const auto per = static_cast<std::size_t>(c.samples);
    for (std::size_t ti = 0; ti < c.delta_e2.size(); ++ti) {
        std::vector<double> gaps;
        for (std::size_t r = 0; r < per; ++r)
            gaps.push_back(rows[ti * per + r].gap);
        const auto s = stats_of(gaps);
        const auto pred = ensemble_predictions(c.n, c.m, c.ensemble.sigma, c.delta_e2[ti]);
        targets.push_back({{"delta_e2", c.delta_e2[ti]},
                           {"realizations", s.count},
                           {"mean_gap", finite_or_null(s.mean)},
                           {"std_gap", finite_or_null(s.std)},
                           {"predicted_mean_gap", pred.mean_gap},
                           {"predicted_std_gap", std::sqrt(pred.var_gap)},
                           {"mean_over_predicted",
                            pred.mean_gap > 0.0 ? finite_or_null(s.mean / pred.mean_gap) : json(nullptr)}});
    }
    t.summary["targets"] = targets;
    return t;
}

Lindbladian spectrum_lindbladian(const ExperimentConfig &c, ComplexVector &psi, json &info) {
    if (c.model.type == "engineered") {
        Rng rng(sub_seed(c.seed, 0, 0));
        const SchmidtState state = draw_state(c, c.delta_e2.front(), rng);
        psi = state.to_vector();
        info["delta_e2_realized"] = measures(state).delta_e2;
        return engineered_lindbladian(state, c.m, c.ensemble, rng);
    }
    const double v = c.model.v ? *c.model.v : rainbow_v_for_delta_e2(c.n, c.delta_e2.front());
    const auto spec = ChainSpec::from_v(c.n, c.model.j, c.model.j_z, v);
    psi = rainbow_state(c.n, v);
    info["v"] = v;
    info["delta_e2_realized"] = measures(rainbow_schmidt(c.n, v)).delta_e2;
    return c.model.type == "xxz" ? xxz_lindbladian(spec) : ladder_lindbladian(spec);
}

Table spectrum_table(const ExperimentConfig &c) {
    Table t;
    t.header = {"index", "re_lambda", "im_lambda", "is_midgap", "residual"};
    json info;
    ComplexVector psi;
    const Lindbladian l = spectrum_lindbladian(c, psi, info);
    const auto spec = spectrum(l, c.steady_tol);
    const auto mask = midgap_mask(spec, c.midgap_fraction);
    for (std::size_t k = 0; k < spec.eigenvalues.size(); ++k) {
        t.rows.push_back({std::to_string(k), num(spec.eigenvalues[k].real()), num(spec.eigenvalues[k].imag()),
                          mask[k] ? "1" : "0", num(spec.residuals[k])});
        t.failed.push_back(false);
    }
    info["model"] = c.model.type;
    info["steady_count"] = spec.steady_count;
    info["gap"] = spec.gap;
    info["midgap_count"] = std::count(mask.begin(), mask.end(), true);
    info["residual_max"] = spec.residual_max;
    info["flagged"] = spec.flagged;
    info["steady_residual"] = steady_residual(l, psi);
    t.summary = info;
    return t;
}

template <class RowFn>
Table ensemble_table(const ExperimentConfig &c, unsigned workers, std::vector<std::string> header, RowFn fn) {
    const auto per = static_cast<std::size_t>(c.samples);
    const std::size_t cols = header.size();
    auto rows = parallel_map(c.delta_e2.size() * per, workers, [&](std::size_t k) {
        const std::size_t ti = k / per;
        const std::size_t r = k % per;
        const std::uint64_t seed = sub_seed(c.seed, ti, r);
        std::vector<std::string> row{std::to_string(seed), num(c.delta_e2[ti])};
        try {
            Rng rng(seed);
            auto rest = fn(c.delta_e2[ti], rng);
            row.insert(row.end(), rest.begin(), rest.end());
            row.push_back("ok");
        } catch (const std::exception &e) {
            while (row.size() + 1 < cols)
                row.push_back("nan");
            row.push_back(fmt::format("error: {}", e.what()));
        }
        return row;
    });
    Table t;
    t.header = std::move(header);
    for (auto &r : rows) {
        t.failed.push_back(r.back().rfind("error", 0) == 0);
        t.rows.push_back(std::move(r));
    }
    return t;
}

std::vector<double> column(const Table &t, const std::string &name, std::size_t first, std::size_t count) {
    const auto idx = static_cast<std::size_t>(std::find(t.header.begin(), t.header.end(), name) - t.header.begin());
    std::vector<double> out;
    for (std::size_t k = first; k < first + count; ++k) {
        try {
            out.push_back(std::stod(t.rows[k][idx]));
        } catch (const std::exception &) {
            out.push_back(kNaN);
        }
    }
    return out;
}

Table bound_audit_table(const ExperimentConfig &c, unsigned workers) {
    Table t = ensemble_table(
        c, workers,
        {"seed", "delta_e2_target", "delta_e2_realized", "fidelity_rate", "gamma_max", "gamma_max_prime",
         "violates_max", "violates_prime", "status"},
        [&](double target, Rng &rng) -> std::vector<std::string> {
            const SchmidtState state = draw_state(c, target, rng);
            const Lindbladian l = engineered_lindbladian(state, c.m, c.ensemble, rng);
            const Index d = l.dim();
            const auto rank = static_cast<Index>(1 + rng.next_u64() % static_cast<std::uint64_t>(d));
            const ComplexMatrix rho = rng.random_density(d, rank);
            const auto a = audit_rate(l, state, rho);
            return {num(measures(state).delta_e2), num(a.rate), num(a.gamma_max), num(a.gamma_max_prime),
                    a.violates_max ? "1" : "0", a.violates_prime ? "1" : "0"};
        });
    std::size_t vmax = 0, vprime = 0;
    double worst = 0.0;
    const auto rates = column(t, "fidelity_rate", 0, t.rows.size());
    const auto gmax = column(t, "gamma_max", 0, t.rows.size());
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        vmax += t.rows[k][6] == "1";
        vprime += t.rows[k][7] == "1";
        if (std::isfinite(rates[k]) && gmax[k] > 0.0)
            worst = std::max(worst, std::abs(rates[k]) / gmax[k]);
    }
    t.summary = {{"violations_gamma_max", vmax}, {"violations_gamma_max_prime", vprime},
                 {"max_rate_over_gamma_max", worst}};
    return t;
}

Table haar_rate_table(const ExperimentConfig &c, unsigned workers) {
    Table t = ensemble_table(c, workers,
                             {"seed", "delta_e2_target", "delta_e2_realized", "haar_rate_exact", "trace_form",
                              "haar_bound", "predicted_mean_haar_rate", "status"},
                             [&](double target, Rng &rng) -> std::vector<std::string> {
                                 const SchmidtState state = draw_state(c, target, rng);
                                 const Lindbladian l = engineered_lindbladian(state, c.m, c.ensemble, rng);
                                 const auto h = haar_rate_exact(l, state);
                                 const auto pred = ensemble_predictions(c.n, c.m, c.ensemble.sigma, target);
                                 return {num(measures(state).delta_e2), num(h.double_sum), num(h.trace_form),
                                         num(haar_bound(l, state)), num(pred.mean_haar_rate)};
                             });
    json targets = json::array();
    const auto per = static_cast<std::size_t>(c.samples);
    for (std::size_t ti = 0; ti < c.delta_e2.size(); ++ti) {
        const auto s = stats_of(column(t, "haar_rate_exact", ti * per, per));
        const double pred = ensemble_predictions(c.n, c.m, c.ensemble.sigma, c.delta_e2[ti]).mean_haar_rate;
        targets.push_back({{"delta_e2", c.delta_e2[ti]},
                           {"mean_haar_rate", finite_or_null(s.mean)},
                           {"predicted", pred},
                           {"mean_over_predicted", pred > 0.0 ? finite_or_null(s.mean / pred) : json(nullptr)}});
    }
    t.summary["targets"] = targets;
    return t;
}

Table cqa_table(const ExperimentConfig &c, unsigned workers) {
    Table t = ensemble_table(
        c, workers,
        {"seed", "delta_e2_target", "delta_e2_realized", "gap_full", "gap_a", "inclusion_error", "steady_residual",
         "status"},
        [&](double target, Rng &rng) -> std::vector<std::string> {
            const SchmidtState state = draw_state(c, target, rng);
            std::vector<ComplexMatrix> as;
            for (int k = 0; k < c.m; ++k)
                as.push_back(random_a(c.ensemble, state, rng));
            const auto cqa = cqa_construct(as, state);
            const auto full = spectrum(cqa.full, c.steady_tol);
            const auto sys = spectrum(cqa.system_a, c.steady_tol);
            double worst = 0.0;
            for (const auto &la : sys.eigenvalues) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto &lf : full.eigenvalues)
                    best = std::min(best, std::abs(la - lf));
                worst = std::max(worst, best);
            }
            return {num(measures(state).delta_e2), num(full.gap), num(sys.gap), num(worst),
                    num(steady_residual(cqa.full, state.to_vector()))};
        });
    const auto err = column(t, "inclusion_error", 0, t.rows.size());
    double worst = 0.0;
    for (double e : err)
        if (std::isfinite(e))
            worst = std::max(worst, e);
    t.summary = {{"max_inclusion_error", worst}};
    return t;
}

Table uneven_table(const ExperimentConfig &c, unsigned workers) {
    const UnevenSpec spec{c.n, c.n_b, c.sigma_b};
    Table t = ensemble_table(
        c, workers,
        {"seed", "delta_e2_target", "delta_e2_realized", "gap", "reduced_gap", "gamma_uneven", "absorbing_sum",
         "steady_count", "status"},
        [&](double target, Rng &rng) -> std::vector<std::string> {
            const SchmidtState base = draw_state(c, target, rng);
            const SchmidtState state = SchmidtState::from_weights(base.weights(), c.n, c.n_b);
            const Lindbladian l = uneven_lindbladian(state, c.m, c.ensemble, spec, rng);
            const auto full = spectrum(l, c.steady_tol);
            const double scale = std::max(l.mean_kappa(), 1.0);
            const auto reduced = spectrum_of(reduced_superoperator(l, c.n), scale, c.steady_tol);
            const auto ab = absorbing_norms(l, state.to_vector());
            return {num(measures(state).delta_e2), num(full.gap), num(reduced.gap),
                    num(gamma_uneven(l, state, spec)),
                    num(std::accumulate(ab.norms.begin(), ab.norms.end(), 0.0)),
                    std::to_string(full.steady_count)};
        });
    json targets = json::array();
    const auto per = static_cast<std::size_t>(c.samples);
    for (std::size_t ti = 0; ti < c.delta_e2.size(); ++ti) {
        const auto s = stats_of(column(t, "reduced_gap", ti * per, per));
        targets.push_back({{"delta_e2", c.delta_e2[ti]}, {"mean_reduced_gap", finite_or_null(s.mean)},
                           {"sigma_b2_plus_2delta", c.sigma_b * c.sigma_b + 2.0 * c.delta_e2[ti]}});
    }
    t.summary["targets"] = targets;
    return t;
}

void write_text(const fs::path &p, const std::string &text) {
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw Error(fmt::format("cannot write '{}'", p.string()));
    out << text;
}

} // namespace

RunResult run_experiment(const ExperimentConfig &config, const RunOptions &opts) {
    ExperimentConfig c = config;
    if (opts.seed)
        c.seed = *opts.seed;
    const fs::path dir = opts.out_dir ? *opts.out_dir : fs::path(c.output);
    fs::create_directories(dir);
    const unsigned workers = opts.workers;
    const std::string stem(kind_name(c.kind));

    spdlog::info("{}: n={} m={} samples={} targets={} seed={}", stem, c.n, c.m, c.samples, c.delta_e2.size(),
                 c.seed);
    Table t;
    switch (c.kind) {
    case ExperimentKind::GapSweep:
        t = gap_sweep_table(c, workers);
        break;
    case ExperimentKind::Spectrum:
    case ExperimentKind::Xxz:
    case ExperimentKind::Ladder:
        t = spectrum_table(c);
        break;
    case ExperimentKind::BoundAudit:
        t = bound_audit_table(c, workers);
        break;
    case ExperimentKind::HaarRate:
        t = haar_rate_table(c, workers);
        break;
    case ExperimentKind::Cqa:
        t = cqa_table(c, workers);
        break;
    case ExperimentKind::Uneven:
        t = uneven_table(c, workers);
        break;
    }

    RunResult res;
    res.csv = dir / (stem + ".csv");
    res.sidecar = dir / (stem + ".json");
    res.config_echo = dir / "config.effective.yaml";
    res.rows = t.rows.size();
    res.failed_rows = static_cast<std::size_t>(std::count(t.failed.begin(), t.failed.end(), true));

    std::string csv;
    for (std::size_t k = 0; k < t.header.size(); ++k)
        csv += (k ? "," : "") + t.header[k];
    csv += "\n";
    for (const auto &row : t.rows) {
        for (std::size_t k = 0; k < row.size(); ++k)
            csv += (k ? "," : "") + csv_field(row[k]);
        csv += "\n";
    }
    write_text(res.csv, csv);
    write_text(res.config_echo, config_to_yaml(c));

    json side;
    side["kind"] = stem;
    side["config"] = config_to_json(c);
    side["versions"] = {{"forge", kVersion},
                        {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                              EIGEN_MINOR_VERSION)},
                        {"compiler", __VERSION__}};
    side["csv"] = res.csv.filename().string();
    side["rows"] = res.rows;
    side["failed_rows"] = res.failed_rows;
    side["summary"] = t.summary;
    write_text(res.sidecar, side.dump(2) + "\n");

    res.exit_code = (res.rows > 0 && res.failed_rows == res.rows) ? 2 : 0;
    if (res.failed_rows)
        spdlog::warn("{} of {} rows failed", res.failed_rows, res.rows);
    return res;
}

} // namespace forge
