#include "forge/bounds.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace forge {

namespace {

void require_schmidt_frame(const Lindbladian &l, const SchmidtState &state, const char *what) {
    if (l.n_a != state.n_a() || l.n_b != state.n_b())
        throw PreconditionError(fmt::format("{}: Lindbladian is {}x{}, state is {}x{}", what, l.n_a, l.n_b,
                                            state.n_a(), state.n_b()));
}

void require_full_rank(const SchmidtState &state, const char *what) {
    if (state.rank_deficient() || state.p_min() <= 1e-12)
        throw PreconditionError(
            fmt::format("{}: p_min = {:.3e} is not full rank; use gamma_max_prime", what, state.p_min()));
}

double one_minus_e2(const SchmidtState &state) { return std::max(0.0, 1.0 - measures(state).scaled_e2); }

double max_abs(const ComplexMatrix &m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

} // namespace

double JumpMagnitudes::sum_a_squared() const {
    double s = 0.0;
    for (double x : a)
        s += x * x;
    return s;
}

JumpMagnitudes jump_magnitudes(const Lindbladian &l) {
    JumpMagnitudes out;
    for (const auto &j : l.jumps) {
        out.a.push_back(std::sqrt(j.kappa) * max_abs(j.a));
        out.b.push_back(std::sqrt(j.kappa) * max_abs(j.b));
    }
    return out;
}

double gamma_max(const Lindbladian &l, const SchmidtState &state) {
    require_schmidt_frame(l, state, "gamma_max");
    require_full_rank(state, "gamma_max");
    const double n = static_cast<double>(state.size());
    return jump_magnitudes(l).sum_a_squared() * std::sqrt(2.0) * (n - 1.0) / state.p_min() * one_minus_e2(state);
}

double gamma_max_prime(const Lindbladian &l, const SchmidtState &state) {
    require_schmidt_frame(l, state, "gamma_max_prime");
    const double n = static_cast<double>(state.size());
    const auto mags = jump_magnitudes(l);
    double sa = 0.0;
    double sb = 0.0;
    for (double x : mags.a)
        sa += x;
    for (double x : mags.b)
        sb += x;
    return std::sqrt(2.0 * (n * n * n - n * n)) * (sa * sa + sb * sb) * std::sqrt(one_minus_e2(state));
}

double gamma_uneven(const Lindbladian &l, const SchmidtState &state, const UnevenSpec &spec) {
    spec.validate();
    require_schmidt_frame(l, state, "gamma_uneven");
    if (state.n_a() != spec.n_a || state.n_b() != spec.n_b)
        throw PreconditionError("gamma_uneven: state dimensions do not match the spec");
    require_full_rank(state, "gamma_uneven");
    const double n = static_cast<double>(spec.n_a);
    double total = jump_magnitudes(l).sum_a_squared() * std::sqrt(2.0) * (n - 1.0) / state.p_min() *
                   one_minus_e2(state);
    for (const auto &j : l.jumps) {
        const ComplexMatrix block = std::sqrt(j.kappa) * j.b.topRightCorner(spec.n_a, spec.n_b - spec.n_a);
        const double s = linalg::spectral_norm(block);
        total += s * s;
    }
    return total;
}

HaarRate haar_rate_exact(const Lindbladian &l, const SchmidtState &state) {
    require_schmidt_frame(l, state, "haar_rate_exact");
    if (state.n_a() != state.n_b())
        throw PreconditionError("haar_rate_exact: equal dimensions required");
    require_full_rank(state, "haar_rate_exact");
    const Index n = state.size();
    const double n2 = static_cast<double>(n * n);
    HaarRate out;
    double scale = 0.0;
    for (const auto &jump : l.jumps) {
        for (Index k = 0; k < n; ++k)
            for (Index j = 0; j < n; ++j) {
                const double dp = state.weight(j) - state.weight(k);
                const double a2 = jump.kappa * std::norm(jump.a(j, k));
                out.double_sum += a2 * dp * dp / state.weight(j);
                scale += a2;
            }
    }
    out.double_sum /= n2;
    const ComplexVector psi = state.to_vector();
    out.trace_form = apply_adjoint(l, psi * psi.adjoint()).trace().real() / n2;
    const double diff = std::abs(out.double_sum - out.trace_form);
    if (diff > 1e-10 * std::abs(out.trace_form) + 1e-14 * std::max(scale, 1.0))
        throw PreconditionError(fmt::format(
            "haar_rate_exact: double sum {:.17g} disagrees with trace form {:.17g}; jumps are not "
            "engineered partners in the Schmidt basis",
            out.double_sum, out.trace_form));
    return out;
}

double haar_bound(const Lindbladian &l, const SchmidtState &state) {
    require_schmidt_frame(l, state, "haar_bound");
    require_full_rank(state, "haar_bound");
    const double n = static_cast<double>(state.size());
    return 2.0 * jump_magnitudes(l).sum_a_squared() * (n - 1.0) / (n * n) / state.p_min() * one_minus_e2(state);
}

EnsemblePrediction ensemble_predictions(int n, int m, double sigma, double delta_e2) {
    if (m < 1)
        throw PreconditionError("ensemble_predictions: m must be at least 1");
    if (n < 1)
        throw PreconditionError("ensemble_predictions: n must be at least 1");
    const double s2 = sigma * sigma;
    EnsemblePrediction p;
    p.mean_gap = 2.0 * (m - 1) * s2 * delta_e2;
    p.mean_haar_rate = 2.0 * m * s2 * delta_e2;
    p.var_gap = (m - 1) * s2 * s2 * delta_e2 * delta_e2;
    return p;
}

double mixing_lower_bound(double gamma, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw PreconditionError(fmt::format("mixing_lower_bound: epsilon {} outside [0, 1]", epsilon));
    if (!(gamma >= 0.0))
        throw PreconditionError(fmt::format("mixing_lower_bound: negative rate {}", gamma));
    if (gamma == 0.0)
        return std::numeric_limits<double>::infinity();
    return (1.0 - epsilon) / gamma;
}

double perturbative_gap(const Lindbladian &l, const SchmidtState &state) {
    const auto h = haar_rate_exact(l, state);
    const double n2 = static_cast<double>(state.size() * state.size());
    return h.trace_form * n2;
}

BoundReport evaluate_bounds(const Lindbladian &l, const SchmidtState &state, double epsilon, double sigma,
                            const std::optional<UnevenSpec> &uneven) {
    BoundReport r;
    r.gamma_max_prime = gamma_max_prime(l, state);
    const ComplexVector psi = state.to_vector();
    r.symmetry_error = strong_symmetry_check(l, psi).symmetry_error;
    const auto em = measures(state);
    const auto pred = ensemble_predictions(static_cast<int>(state.size()), static_cast<int>(l.jumps.size()), sigma,
                                           em.delta_e2);
    r.ensemble_mean_gap = pred.mean_gap;
    r.ensemble_var_gap = pred.var_gap;
    if (uneven) {
        r.gamma_uneven = gamma_uneven(l, state, *uneven);
        r.gamma_max = *r.gamma_uneven;
        r.mixing_lower = mixing_lower_bound(r.gamma_max, epsilon);
        return r;
    }
    r.gamma_max = gamma_max(l, state);
    r.haar_bound = haar_bound(l, state);
    r.haar_rate_exact = haar_rate_exact(l, state).value();
    r.mixing_lower = mixing_lower_bound(r.gamma_max, epsilon);
    return r;
}

RateAudit audit_rate(const Lindbladian &l, const SchmidtState &state, const ComplexMatrix &rho) {
    RateAudit a;
    a.rate = fidelity_rate(l, rho, state.to_vector());
    a.gamma_max_prime = gamma_max_prime(l, state);
    const double slack = 1e-12 * std::max(1.0, a.gamma_max_prime);
    a.violates_prime = std::abs(a.rate) > a.gamma_max_prime + slack;
    if (state.rank_deficient() || state.p_min() <= 1e-12) {
        a.gamma_max = std::numeric_limits<double>::quiet_NaN();
    } else {
        a.gamma_max = gamma_max(l, state);
        a.violates_max = std::abs(a.rate) > a.gamma_max + 1e-12 * std::max(1.0, a.gamma_max);
    }
    return a;
}

} // namespace forge
