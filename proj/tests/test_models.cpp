#include "forge/models.hpp"

#include <cmath>
#include <doctest.h>

using namespace forge;

namespace {

// Rung i (0-based) contributes u|00> - v|11> for even i and u|00> + v|11> for odd i.
// A sites occupy the high bits, B sites the low bits, site 1 first.
ComplexVector rainbow_oracle(int n, double v) {
    const double u = std::sqrt(1.0 - v * v);
    const Index dim = Index{1} << (2 * n);
    ComplexVector out = ComplexVector::Zero(dim);
    for (Index bits = 0; bits < (Index{1} << n); ++bits) {
        double amp = 1.0;
        for (int i = 0; i < n; ++i) {
            const bool up = (bits >> (n - 1 - i)) & 1;
            amp *= up ? (i % 2 == 0 ? -v : v) : u;
        }
        out((bits << n) | bits) = amp;
    }
    return out;
}

SpectrumResult fake_spectrum(std::vector<double> rates, int steady) {
    SpectrumResult r;
    for (int k = 0; k < steady; ++k)
        r.eigenvalues.push_back(0.0);
    for (double x : rates)
        r.eigenvalues.push_back(-x);
    r.steady_count = steady;
    return r;
}

} // namespace

TEST_CASE("ChainSpec validation") {
    CHECK_NOTHROW(ChainSpec::from_v(2, 1.0, 0.5, 0.3).validate());
    ChainSpec bad = ChainSpec::from_v(2, 1.0, 0.0, 0.3);
    bad.u = 1.0;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    CHECK_THROWS_AS(ChainSpec::from_v(0, 1.0, 0.0, 0.1).validate(), PreconditionError);
}

TEST_CASE("rainbow_state layout and measures") {
    for (int n : {1, 2, 3})
        for (double v : {0.0, 0.2, 0.5}) {
            CHECK((rainbow_state(n, v) - rainbow_oracle(n, v)).norm() < 1e-14);
            const auto d = schmidt_from_vector(rainbow_state(n, v), Index{1} << n, Index{1} << n);
            const double single = std::pow(1.0 - v * v, 2) + std::pow(v, 4);
            CHECK(measures(d.state).renyi2 == doctest::Approx(-n * std::log(single)).epsilon(1e-10));
            const auto direct = rainbow_schmidt(n, v);
            for (Index k = 0; k < direct.size(); ++k)
                CHECK(std::abs(direct.weight(k) - d.state.weight(k)) < 1e-12);
        }
    ComplexVector vac = ComplexVector::Zero(16);
    vac(0) = 1.0;
    CHECK((rainbow_state(2, 0.0) - vac).norm() == 0.0);
    CHECK(std::abs(measures(rainbow_schmidt(1, 1.0 / std::sqrt(2.0))).delta_e2) < 1e-15);
}

TEST_CASE("rainbow deficit is monotone and invertible") {
    for (int n : {1, 2, 3}) {
        double prev = 1e300;
        for (double v = 0.05; v <= 1.0 / std::sqrt(2.0); v += 0.05) {
            const double d = measures(rainbow_schmidt(n, v)).delta_e2;
            CHECK(d < prev);
            prev = d;
        }
        for (double target : {1e-3, 1e-2}) {
            const double v = rainbow_v_for_delta_e2(n, target);
            CHECK(measures(rainbow_schmidt(n, v)).delta_e2 == doctest::Approx(target).epsilon(1e-9));
        }
    }
}

TEST_CASE("rainbow is steady for both models") {
    for (int n : {1, 2})
        for (double v : {0.0, 0.1, 0.3})
            for (double jz : {0.0, 0.5, 1.0}) {
                const auto spec = ChainSpec::from_v(n, 1.0, jz, v);
                const ComplexVector psi = rainbow_state(n, v);
                CHECK(steady_residual(xxz_lindbladian(spec), psi) <= 1e-9);
                CHECK(steady_residual(ladder_lindbladian(spec), psi) <= 1e-9);
            }
}

TEST_CASE("jumps are local") {
    const auto l = xxz_lindbladian(ChainSpec::from_v(2, 1.0, 0.5, 0.3));
    CHECK(l.n_a == 4);
    CHECK(l.n_b == 4);
    REQUIRE(l.jumps.size() == 2);
    for (const auto &j : l.jumps) {
        const auto split = split_local(j.full(), 4, 4);
        REQUIRE(split.has_value());
        CHECK((split->full() - j.full()).norm() < 1e-12);
    }
    CHECK((l.hamiltonian - l.hamiltonian.adjoint()).norm() == 0.0);
}

TEST_CASE("ladder rung Hamiltonian eigenvalue on the rainbow state") {
    for (int n : {1, 2, 3})
        for (double jz : {0.0, 0.5, 1.0}) {
            const auto spec = ChainSpec::from_v(n, 1.0, jz, 0.3);
            const ComplexVector psi = rainbow_state(n, 0.3);
            const ComplexVector hpsi = ladder_rung_hamiltonian(spec) * psi;
            CHECK((hpsi - n * jz * psi).norm() < 1e-12);
        }
}

TEST_CASE("Hamiltonian-free limits agree") {
    const auto a = xxz_lindbladian(ChainSpec::from_v(2, 0.0, 0.0, 0.3));
    const auto b = ladder_lindbladian(ChainSpec::from_v(2, 0.0, 0.0, 0.3));
    CHECK((build_superoperator(a) - build_superoperator(b)).norm() == 0.0);
}

TEST_CASE("vacuum steady state at v = 0") {
    const auto l = xxz_lindbladian(ChainSpec::from_v(1, 1.0, 0.0, 0.0));
    const auto ss = steady_states(l);
    REQUIRE(ss.size() == 1);
    CHECK(std::abs(ss[0](0, 0) - 1.0) < 1e-10);
}

TEST_CASE("rainbow fidelity when the steady state is unique") {
    const double v = rainbow_v_for_delta_e2(1, 1e-2);
    const auto l = xxz_lindbladian(ChainSpec::from_v(1, 1.0, 0.5, v));
    if (spectrum(l).steady_count == 1) {
        const auto ss = steady_states(l);
        CHECK(fidelity_to_pure(ss[0], rainbow_state(1, v)) >= 1.0 - 1e-8);
    }
}

TEST_CASE("midgap mask on synthetic spectra") {
    // rates 1e-4, 1, 2, 3: median of the four is 1.5
    auto r = fake_spectrum({1e-4, 1.0, 2.0, 3.0}, 1);
    CHECK(count_midgap(r) == 1);
    const auto mask = midgap_mask(r);
    REQUIRE(mask.size() == 5);
    CHECK_FALSE(mask[0]);
    CHECK(mask[1]);
    CHECK_FALSE(mask[2]);
    CHECK(count_midgap(r, 0.5) == 1);
    CHECK(count_midgap(r, 0.7) == 2);
    r.partial = true;
    CHECK_THROWS_AS(count_midgap(r), PreconditionError);
}

TEST_CASE("midgap counts at n = 2") {
    const double v = rainbow_v_for_delta_e2(2, 1e-3);
    CHECK(count_midgap(spectrum(xxz_lindbladian(ChainSpec::from_v(2, 1.0, 0.0, v)))) == 2);
    CHECK(count_midgap(spectrum(xxz_lindbladian(ChainSpec::from_v(2, 1.0, 0.5, v)))) == 1);
    CHECK(count_midgap(spectrum(ladder_lindbladian(ChainSpec::from_v(2, 1.0, 0.5, v)))) == 2);
}
