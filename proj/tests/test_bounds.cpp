#include "forge/bounds.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <doctest.h>

using namespace forge;

namespace {

ComplexMatrix sigma_minus() {
    ComplexMatrix s = ComplexMatrix::Zero(2, 2);
    s(0, 1) = 1.0;
    return s;
}

// a = |0><1| on p = (0.8, 0.2), partner filled in by hand
Lindbladian single_jump_example() {
    auto l = empty_lindbladian(2, 2);
    ComplexMatrix b = ComplexMatrix::Zero(2, 2);
    b(1, 0) = -0.5;
    l.jumps.push_back({sigma_minus(), b, 1.0});
    return l;
}

const SchmidtState kExample = SchmidtState::from_weights({0.8, 0.2});

} // namespace

TEST_CASE("gamma_max examples") {
    CHECK(gamma_max(single_jump_example(), kExample) == doctest::Approx(std::sqrt(2.0) * 5.0 * 0.36).epsilon(1e-12));
    CHECK(gamma_max(single_jump_example(), kExample) == doctest::Approx(2.5456).epsilon(1e-4));
    Rng rng(1);
    const auto maximal = SchmidtState::uniform(3);
    CHECK(gamma_max(engineered_lindbladian(maximal, 2, {}, rng), maximal) == doctest::Approx(0.0));
    CHECK_THROWS_AS(gamma_max(single_jump_example(), SchmidtState::from_weights({1.0, 0.0})), PreconditionError);
}

TEST_CASE("gamma_max_prime examples") {
    auto l = empty_lindbladian(2, 2);
    l.jumps.push_back({sigma_minus(), sigma_minus().transpose(), 1.0});
    const auto product = SchmidtState::from_weights({1.0, 0.0});
    CHECK(gamma_max_prime(l, product) == doctest::Approx(std::sqrt(8.0) * 2.0).epsilon(1e-12));
    CHECK(gamma_max_prime(l, product) == doctest::Approx(5.657).epsilon(1e-3));
    CHECK(gamma_max_prime(l, SchmidtState::uniform(2)) == doctest::Approx(0.0));

    // halving 1 - E2 scales by 1/sqrt(2); for N = 2, 1 - E2 = 2 delta
    const auto s1 = SchmidtState::from_weights({0.9, 0.1});       // delta = 0.32
    const double q = 0.5 + std::sqrt(0.08);                   // delta = 2 (q - 1/2)^2 = 0.16
    const auto s2 = SchmidtState::from_weights({q, 1.0 - q});
    CHECK(measures(s2).delta_e2 == doctest::Approx(0.16).epsilon(1e-12));
    CHECK(gamma_max_prime(l, s2) / gamma_max_prime(l, s1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("gamma_max decreases with E2 at fixed p_min") {
    const auto l = [] {
        auto x = empty_lindbladian(3, 3);
        ComplexMatrix a = ComplexMatrix::Zero(3, 3);
        a(0, 1) = 1.0;
        x.jumps.push_back({a, ComplexMatrix::Zero(3, 3), 1.0});
        return x;
    }();
    double prev = 1e300;
    for (double p0 : {0.8, 0.7, 0.6, 0.5, 0.45}) {
        const auto s = SchmidtState::from_weights({p0, 0.9 - p0, 0.1});
        if (s.p_min() != 0.1)
            continue;
        const double g = gamma_max(l, s);
        CHECK(g < prev);
        prev = g;
    }
}

TEST_CASE("haar_rate_exact") {
    const auto h = haar_rate_exact(single_jump_example(), kExample);
    // (1/N^2) sum |A_jk|^2 (p_j - p_k)^2 / p_j = 0.36 / 0.8 / 4
    CHECK(h.double_sum == doctest::Approx(0.1125).epsilon(1e-12));
    CHECK(h.trace_form == doctest::Approx(0.1125).epsilon(1e-12));

    Rng rng(2);
    const auto maximal = SchmidtState::uniform(3);
    CHECK(std::abs(haar_rate_exact(engineered_lindbladian(maximal, 2, {}, rng), maximal).value()) < 1e-14);
    CHECK_THROWS_AS(haar_rate_exact(single_jump_example(), SchmidtState::from_weights({1.0, 0.0})),
                    PreconditionError);
}

TEST_CASE("haar_rate_exact against Haar sampling") {
    Rng rng(3);
    const auto state = sample_schmidt_fixed_e2(2, 0.1, rng);
    const auto l = engineered_lindbladian(state, 2, {}, rng);
    const ComplexVector psi = state.to_vector();
    const int samples = 2000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < samples; ++k) {
        const ComplexVector phi = rng.haar_state(4);
        const double r = fidelity_rate(l, phi * phi.adjoint(), psi);
        sum += r;
        sum2 += r * r;
    }
    const double mean = sum / samples;
    const double se = std::sqrt((sum2 / samples - mean * mean) / (samples - 1));
    CHECK(std::abs(mean - haar_rate_exact(l, state).value()) <= 3.0 * se);
}

TEST_CASE("haar_bound") {
    CHECK(haar_bound(single_jump_example(), kExample) == doctest::Approx(0.9).epsilon(1e-12));
    Rng rng(4);
    const auto maximal = SchmidtState::uniform(4);
    CHECK(haar_bound(engineered_lindbladian(maximal, 2, {}, rng), maximal) == doctest::Approx(0.0));
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 2 + trial % 4;
        const auto s = sample_schmidt_fixed_e2(n, 0.2 * (1.0 - 1.0 / static_cast<double>(n)), rng);
        const auto l = engineered_lindbladian(s, 1 + trial % 3, {}, rng);
        CHECK(haar_rate_exact(l, s).value() <= haar_bound(l, s) * (1.0 + 1e-12));
    }
}

TEST_CASE("ensemble_predictions") {
    CHECK(ensemble_predictions(4, 1, 1.0, 1e-3).mean_gap == 0.0);
    const auto p = ensemble_predictions(4, 2, 1.0, 1e-3);
    CHECK(p.mean_gap == doctest::Approx(2e-3));
    CHECK(p.mean_haar_rate == doctest::Approx(4e-3));
    CHECK(p.var_gap == doctest::Approx(1e-6));
    CHECK_THROWS_AS(ensemble_predictions(4, 0, 1.0, 1e-3), PreconditionError);
}

TEST_CASE("mixing_lower_bound") {
    CHECK(mixing_lower_bound(2.5456, 1.0) == 0.0);
    CHECK(mixing_lower_bound(2.5456, 0.5) == doctest::Approx(0.1964).epsilon(1e-3));
    CHECK(mixing_lower_bound(0.0, 0.5) == kNotReached);
    CHECK_THROWS_AS(mixing_lower_bound(-1.0, 0.5), PreconditionError);
    CHECK_THROWS_AS(mixing_lower_bound(1.0, 1.5), PreconditionError);
}

TEST_CASE("perturbative_gap") {
    Rng rng(5);
    const auto maximal = SchmidtState::uniform(3);
    const auto lm = engineered_lindbladian(maximal, 2, {}, rng);
    CHECK(std::abs(perturbative_gap(lm, maximal)) < 1e-13);

    const auto state = sample_schmidt_fixed_e2(3, 1e-3, rng);
    const auto l = engineered_lindbladian(state, 2, {}, rng);
    const double pg = perturbative_gap(l, state);
    CHECK(pg == doctest::Approx(9.0 * haar_rate_exact(l, state).value()).epsilon(1e-10));
    CHECK(pg == doctest::Approx(strong_symmetry_check(l, state.to_vector()).symmetry_error).epsilon(1e-10));
    // the first-order splitting overestimates the gap of random instances
    for (int trial = 0; trial < 10; ++trial) {
        const auto si = sample_schmidt_fixed_e2(2 + trial % 2, 1e-3, rng);
        const auto li = engineered_lindbladian(si, 2, {}, rng);
        const double gap = spectrum(li).gap;
        CHECK(gap > 0.0);
        CHECK(gap <= perturbative_gap(li, si));
    }
}

TEST_CASE("gamma_uneven") {
    Rng rng(6);
    const auto s = SchmidtState::from_weights({0.6, 0.4}, 2, 3);
    const auto l0 = uneven_lindbladian(s, 2, {}, {2, 3, 0.0}, rng);
    const auto square = SchmidtState::from_weights({0.6, 0.4});
    auto l_sq = empty_lindbladian(2, 2);
    for (const auto &j : l0.jumps)
        l_sq.jumps.push_back({j.a, j.b.topLeftCorner(2, 2), j.kappa});
    CHECK(gamma_uneven(l0, s, {2, 3, 0.0}) == doctest::Approx(gamma_max(l_sq, square)).epsilon(1e-12));

    const auto m = SchmidtState::from_weights({0.5, 0.5}, 2, 3);
    const auto lm = uneven_lindbladian(m, 2, {}, {2, 3, 0.4}, rng);
    const double g = gamma_uneven(lm, m, {2, 3, 0.4});
    CHECK(g > 0.0);
    double oracle = 0.0;
    for (const auto &j : lm.jumps) {
        const ComplexMatrix block = std::sqrt(j.kappa) * j.b.topRightCorner(2, 1);
        Eigen::JacobiSVD<ComplexMatrix> svd(block);
        oracle += svd.singularValues()(0) * svd.singularValues()(0);
    }
    CHECK(g == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("evaluate_bounds fills the report") {
    Rng rng(7);
    const auto s = sample_schmidt_fixed_e2(3, 0.01, rng);
    const auto l = engineered_lindbladian(s, 2, {}, rng);
    const auto r = evaluate_bounds(l, s, 0.1);
    CHECK(r.gamma_max == doctest::Approx(gamma_max(l, s)));
    CHECK(r.mixing_lower == doctest::Approx(0.9 / r.gamma_max));
    CHECK(r.ensemble_mean_gap == doctest::Approx(2.0 * 0.01));
    CHECK_FALSE(r.gamma_uneven.has_value());
    for (double v : {r.gamma_max, r.gamma_max_prime, r.haar_bound, r.haar_rate_exact, r.mixing_lower})
        CHECK(v >= 0.0);
}

TEST_CASE("audit: random states never exceed the bounds") {
    Rng rng(8);
    int violations = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const Index n = 2 + trial % 3;
        const double delta = std::pow(10.0, -4.0 + 3.3 * rng.uniform()) * (1.0 - 1.0 / static_cast<double>(n));
        const auto s = sample_schmidt_fixed_e2(n, delta, rng);
        const auto l = engineered_lindbladian(s, 1 + trial % 3, {}, rng);
        const ComplexVector phi = rng.haar_state(n * n);
        const auto a = audit_rate(l, s, phi * phi.adjoint());
        violations += (a.violates_max || a.violates_prime) ? 1 : 0;
    }
    CHECK(violations == 0);
}

TEST_CASE("audit: the fastest state can beat gamma_max") {
    // The largest rate over all states is the top eigenvalue of L^dag(|psi><psi|).
    // Near maximal entanglement at N = 2 it can lie above gamma_max while
    // gamma_max_prime still holds; the excess found here stays below 1.5.
    Rng rng(9);
    double worst = 0.0;
    for (int trial = 0; trial < 400; ++trial) {
        const auto s = sample_schmidt_fixed_e2(2, 0.5 * std::pow(10.0, -3.0 + rng.uniform()), rng);
        const auto l = engineered_lindbladian(s, 1, {}, rng);
        const ComplexVector psi = s.to_vector();
        const ComplexMatrix g = apply_adjoint(l, psi * psi.adjoint());
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (g + g.adjoint()));
        const ComplexVector top = es.eigenvectors().col(3);
        const auto a = audit_rate(l, s, top * top.adjoint());
        CHECK_FALSE(a.violates_prime);
        worst = std::max(worst, a.rate / a.gamma_max);
    }
    CHECK(worst > 1.0);
    CHECK(worst < 1.5);
}
