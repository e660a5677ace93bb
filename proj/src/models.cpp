#include "forge/models.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace forge {

namespace {

ComplexMatrix sigma_minus() {
    ComplexMatrix s = ComplexMatrix::Zero(2, 2);
    s(0, 1) = 1.0;
    return s;
}

ComplexMatrix sigma_plus() { return sigma_minus().transpose(); }

ComplexMatrix sigma_z() {
    ComplexMatrix s = ComplexMatrix::Zero(2, 2);
    s(0, 0) = 1.0;
    s(1, 1) = -1.0;
    return s;
}

ComplexMatrix sigma_x() { return sigma_minus() + sigma_plus(); }

ComplexMatrix sigma_y() { return -I_UNIT * (sigma_plus() - sigma_minus()); }

// op on site k (0-based) of an n-qubit chain
ComplexMatrix on_site(const ComplexMatrix &op, int k, int n) {
    ComplexMatrix out = ComplexMatrix::Identity(1, 1);
    for (int s = 0; s < n; ++s)
        out = linalg::kron(out, s == k ? op : ComplexMatrix::Identity(2, 2));
    return out;
}

ComplexMatrix hopping(const ChainSpec &spec) {
    const Index d = Index{1} << spec.n;
    ComplexMatrix h = ComplexMatrix::Zero(d, d);
    for (int i = 0; i + 1 < spec.n; ++i) {
        const ComplexMatrix t = spec.j * on_site(sigma_plus(), i, spec.n) * on_site(sigma_minus(), i + 1, spec.n);
        h += t + t.adjoint();
    }
    return h;
}

ComplexMatrix zz_chain(const ChainSpec &spec) {
    const Index d = Index{1} << spec.n;
    ComplexMatrix h = ComplexMatrix::Zero(d, d);
    for (int i = 0; i + 1 < spec.n; ++i)
        h += spec.j_z * on_site(sigma_z(), i, spec.n) * on_site(sigma_z(), i + 1, spec.n);
    return h;
}

Lindbladian chains_with_boundary_drive(const ChainSpec &spec, const ComplexMatrix &h_a, const ComplexMatrix &h_b) {
    const Index d = Index{1} << spec.n;
    const ComplexMatrix id = ComplexMatrix::Identity(d, d);
    Lindbladian l = empty_lindbladian(d, d);
    l.hamiltonian = linalg::kron(h_a, id) + linalg::kron(id, h_b);
    const ComplexMatrix lower = on_site(sigma_minus(), 0, spec.n);
    const ComplexMatrix raise = on_site(sigma_plus(), 0, spec.n);
    l.jumps.push_back({spec.u * lower, spec.v * raise, 1.0});
    l.jumps.push_back({spec.v * raise, spec.u * lower, 1.0});
    return l;
}

std::vector<double> rainbow_weights(int n, double v) {
    std::vector<double> p{1.0};
    for (int i = 0; i < n; ++i) {
        std::vector<double> next;
        for (double w : p) {
            next.push_back(w * (1.0 - v * v));
            next.push_back(w * v * v);
        }
        p = std::move(next);
    }
    return p;
}

} // namespace

ChainSpec ChainSpec::from_v(int n, double j, double j_z, double v) {
    if (!(v >= 0.0 && v <= 1.0))
        throw PreconditionError(fmt::format("ChainSpec: v = {} outside [0, 1]", v));
    ChainSpec s;
    s.n = n;
    s.j = j;
    s.j_z = j_z;
    s.v = v;
    s.u = std::sqrt(std::max(0.0, 1.0 - v * v));
    s.validate();
    return s;
}

void ChainSpec::validate() const {
    if (n < 1 || n > kMaxChainLength)
        throw PreconditionError(fmt::format("ChainSpec: n = {} outside [1, {}]", n, kMaxChainLength));
    if (std::abs(u * u + v * v - 1.0) > 1e-12)
        throw PreconditionError(fmt::format("ChainSpec: u^2 + v^2 = {}, expected 1", u * u + v * v));
    if (!std::isfinite(j) || !std::isfinite(j_z))
        throw PreconditionError("ChainSpec: couplings must be finite");
}

Lindbladian xxz_lindbladian(const ChainSpec &spec) {
    spec.validate();
    const ComplexMatrix hop = hopping(spec);
    const ComplexMatrix zz = zz_chain(spec);
    return chains_with_boundary_drive(spec, hop + zz, hop - zz);
}

ComplexMatrix ladder_rung_hamiltonian(const ChainSpec &spec) {
    spec.validate();
    const Index d = Index{1} << spec.n;
    ComplexMatrix h = ComplexMatrix::Zero(d * d, d * d);
    for (int i = 0; i < spec.n; ++i) {
        const auto rung = [&](const ComplexMatrix &op) {
            return linalg::kron(on_site(op, i, spec.n), on_site(op, i, spec.n));
        };
        h += spec.j * (rung(sigma_x()) + rung(sigma_y())) + spec.j_z * rung(sigma_z());
    }
    return h;
}

Lindbladian ladder_lindbladian(const ChainSpec &spec) {
    spec.validate();
    const ComplexMatrix hop = hopping(spec);
    Lindbladian l = chains_with_boundary_drive(spec, hop, hop);
    const ComplexMatrix h = l.hamiltonian + ladder_rung_hamiltonian(spec);
    l.hamiltonian = 0.5 * (h + h.adjoint());
    return l;
}

ComplexVector rainbow_state(int n, double v) {
    if (n < 1 || n > kMaxChainLength)
        throw PreconditionError(fmt::format("rainbow_state: n = {} outside [1, {}]", n, kMaxChainLength));
    if (!(v >= 0.0 && v <= 1.0))
        throw PreconditionError(fmt::format("rainbow_state: v = {} outside [0, 1]", v));
    const Index d = Index{1} << n;
    const double u = std::sqrt(std::max(0.0, 1.0 - v * v));
    ComplexVector psi = ComplexVector::Zero(d * d);
    for (Index x = 0; x < d; ++x) {
        double amp = 1.0;
        for (int i = 0; i < n; ++i) {
            const bool bit = (x >> (n - 1 - i)) & 1;
            // sites are 1-based in the sign (-1)^i
            amp *= bit ? ((i % 2 == 0) ? -v : v) : u;
        }
        psi(x * d + x) = amp;
    }
    return psi;
}

SchmidtState rainbow_schmidt(int n, double v) {
    if (n < 1 || n > kMaxChainLength)
        throw PreconditionError(fmt::format("rainbow_schmidt: n = {} outside [1, {}]", n, kMaxChainLength));
    const Index d = Index{1} << n;
    return SchmidtState::from_weights(rainbow_weights(n, v), d, d);
}

double rainbow_v_for_delta_e2(int n, double target) {
    if (n < 1 || n > kMaxChainLength)
        throw PreconditionError(fmt::format("rainbow_v_for_delta_e2: n = {} outside [1, {}]", n, kMaxChainLength));
    const double max_delta = 1.0 - std::ldexp(1.0, -n);
    if (!(target >= 0.0 && target < max_delta))
        throw PreconditionError(
            fmt::format("rainbow_v_for_delta_e2: target {} outside [0, {})", target, max_delta));
    auto delta = [&](double v) { return delta_e2_of(rainbow_weights(n, v)); };
    double lo = 0.0;
    double hi = 1.0 / std::sqrt(2.0);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        // delta decreases in v on this interval
        if (delta(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<bool> midgap_mask(const SpectrumResult &r, double fraction) {
    if (r.partial)
        throw PreconditionError("midgap counting needs the full spectrum");
    if (!(fraction > 0.0))
        throw PreconditionError("midgap threshold fraction must be positive");
    std::vector<double> rates;
    for (const auto &lam : r.eigenvalues)
        if (std::abs(lam) > r.tolerance)
            rates.push_back(-lam.real());
    std::vector<bool> mask(r.eigenvalues.size(), false);
    if (rates.empty())
        return mask;
    std::vector<double> sorted = rates;
    const auto mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    double median = sorted[mid];
    if (sorted.size() % 2 == 0) {
        const double below = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + below);
    }
    const double cut = fraction * median;
    for (std::size_t k = 0; k < r.eigenvalues.size(); ++k) {
        const auto &lam = r.eigenvalues[k];
        mask[k] = std::abs(lam) > r.tolerance && -lam.real() < cut;
    }
    return mask;
}

int count_midgap(const SpectrumResult &r, double fraction) {
    const auto mask = midgap_mask(r, fraction);
    return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

} // namespace forge
