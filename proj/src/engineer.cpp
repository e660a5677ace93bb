#include "forge/engineer.hpp"

#include <cmath>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace forge {

void EnsembleKind::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw PreconditionError(fmt::format("ensemble sigma must be finite and positive, got {}", sigma));
}

std::string_view ensemble_name(Ensemble e) {
    switch (e) {
    case Ensemble::Ginibre:
        return "ginibre";
    case Ensemble::Hermitian:
        return "hermitian";
    case Ensemble::Symmetric:
        return "symmetric";
    case Ensemble::DetailedBalance:
        return "detailed_balance";
    }
    return "?";
}

Ensemble parse_ensemble(std::string_view name) {
    for (auto e : {Ensemble::Ginibre, Ensemble::Hermitian, Ensemble::Symmetric, Ensemble::DetailedBalance})
        if (ensemble_name(e) == name)
            return e;
    throw PreconditionError(
        fmt::format("unknown ensemble '{}' (expected ginibre, hermitian, symmetric or detailed_balance)", name));
}

void UnevenSpec::validate() const {
    if (n_a < 1 || n_b <= n_a)
        throw PreconditionError(fmt::format("uneven dimensions need n_b > n_a >= 1, got {} and {}", n_a, n_b));
    if (!(sigma_b >= 0.0) || !std::isfinite(sigma_b))
        throw PreconditionError(fmt::format("sigma_b must be finite and non-negative, got {}", sigma_b));
}

namespace {

void require_full_rank(const SchmidtState &state, const char *what, const char *alternative) {
    if (state.rank_deficient() || state.p_min() <= kPartnerPminFloor)
        throw PreconditionError(fmt::format("{}: state is rank deficient (p_min = {:.3e}); use {}", what,
                                            state.p_min(), alternative));
    if (state.p_min() < kPartnerWarnPmin)
        spdlog::warn("{}: p_min = {:.3e}, partner entries are amplified by up to {:.3e}", what, state.p_min(),
                     std::sqrt(state.weight(0) / state.p_min()));
}

// (Psi x Psi^{-1})_jk = x_jk sqrt(p_j / p_k)
ComplexMatrix conjugate_by_psi(const ComplexMatrix &x, const SchmidtState &state) {
    ComplexMatrix out = x;
    for (Index k = 0; k < x.cols(); ++k)
        for (Index j = 0; j < x.rows(); ++j)
            out(j, k) *= std::sqrt(state.weight(j) / state.weight(k));
    return out;
}

} // namespace

ComplexMatrix partner_operator(const ComplexMatrix &a, const SchmidtState &state) {
    if (a.rows() != state.size() || a.cols() != state.size())
        throw PreconditionError(
            fmt::format("partner_operator: a is {}x{}, state has {} weights", a.rows(), a.cols(), state.size()));
    require_full_rank(state, "partner_operator", "uneven_partner with a larger B space");
    return -conjugate_by_psi(a.transpose(), state);
}

ComplexMatrix detailed_balance_symmetrize(const ComplexMatrix &a_s, const SchmidtState &state) {
    return (a_s + conjugate_by_psi(a_s.transpose(), state)) / std::sqrt(2.0);
}

ComplexMatrix random_a(const EnsembleKind &kind, const SchmidtState &state, Rng &rng) {
    kind.validate();
    const Index n = state.size();
    const ComplexMatrix g = rng.ginibre(n, n, kind.sigma);
    switch (kind.tag) {
    case Ensemble::Ginibre:
        return g;
    case Ensemble::Hermitian:
        return (g + g.adjoint()) / std::sqrt(2.0);
    case Ensemble::Symmetric:
        return (g + g.transpose()) / std::sqrt(2.0);
    case Ensemble::DetailedBalance:
        require_full_rank(state, "random_a", "a full-rank state");
        return detailed_balance_symmetrize((g + g.transpose()) / std::sqrt(2.0), state);
    }
    return g;
}

JumpOperator random_jump(const EnsembleKind &kind, const SchmidtState &state, Rng &rng) {
    if (state.n_a() != state.n_b())
        throw PreconditionError("random_jump: unequal dimensions, use uneven_lindbladian");
    ComplexMatrix a = random_a(kind, state, rng);
    ComplexMatrix b = partner_operator(a, state);
    return {std::move(a), std::move(b), 1.0};
}

Lindbladian engineered_lindbladian(const SchmidtState &state, int m, const EnsembleKind &kind, Rng &rng) {
    if (m < 1)
        throw PreconditionError("engineered_lindbladian: need at least one jump");
    Lindbladian l = empty_lindbladian(state.n_a(), state.n_b());
    for (int k = 0; k < m; ++k)
        l.jumps.push_back(random_jump(kind, state, rng));
    return l;
}

int kernel_dimension(const JumpOperator &j, double tol) {
    return static_cast<int>(linalg::null_space(j.full(), tol).cols());
}

int joint_kernel_dimension(const std::vector<JumpOperator> &jumps, double tol) {
    if (jumps.empty())
        return 0;
    const Index d = jumps.front().a.rows() * jumps.front().b.rows();
    ComplexMatrix stacked(d * static_cast<Index>(jumps.size()), d);
    for (std::size_t k = 0; k < jumps.size(); ++k)
        stacked.middleRows(static_cast<Index>(k) * d, d) = jumps[k].full();
    const RealVector s = linalg::singular_values(stacked);
    const double cut = tol * (s.size() ? s(0) : 0.0);
    int count = static_cast<int>(d - s.size());
    for (Index k = 0; k < s.size(); ++k)
        if (s(k) <= cut)
            ++count;
    return count;
}

ComplexMatrix uneven_partner(const ComplexMatrix &a, const UnevenSpec &spec, const SchmidtState &state, Rng &rng) {
    spec.validate();
    if (a.rows() != spec.n_a || a.cols() != spec.n_a || state.size() != spec.n_a)
        throw PreconditionError("uneven_partner: a and state must both have dimension n_a");
    require_full_rank(state, "uneven_partner", "a full-rank state of size n_a");
    ComplexMatrix b = ComplexMatrix::Zero(spec.n_b, spec.n_b);
    b.topLeftCorner(spec.n_a, spec.n_a) = -conjugate_by_psi(a.transpose(), state);
    const Index extra = spec.n_b - spec.n_a;
    for (Index k = 0; k < extra; ++k)
        for (Index j = 0; j < spec.n_a; ++j)
            b(j, spec.n_a + k) = rng.complex_normal(spec.sigma_b * spec.sigma_b);
    return b;
}

Lindbladian uneven_lindbladian(const SchmidtState &state, int m, const EnsembleKind &kind, const UnevenSpec &spec,
                               Rng &rng) {
    spec.validate();
    if (state.n_a() != spec.n_a || state.n_b() != spec.n_b)
        throw PreconditionError("uneven_lindbladian: state dimensions do not match the spec");
    if (m < 1)
        throw PreconditionError("uneven_lindbladian: need at least one jump");
    Lindbladian l = empty_lindbladian(spec.n_a, spec.n_b);
    for (int k = 0; k < m; ++k) {
        ComplexMatrix a = random_a(kind, state, rng);
        ComplexMatrix b = uneven_partner(a, spec, state, rng);
        l.jumps.push_back({std::move(a), std::move(b), 1.0});
    }
    return l;
}

namespace {

std::vector<Index> compatible_indices(Index n_a, Index n_b) {
    std::vector<Index> keep;
    const Index d = n_a * n_b;
    for (Index col = 0; col < d; ++col)
        for (Index row = 0; row < d; ++row)
            if (row % n_b < n_a && col % n_b < n_a)
                keep.push_back(col * d + row);
    return keep;
}

} // namespace

ComplexMatrix a_compatible_projector(Index n_a, Index n_b) {
    if (n_b < n_a)
        throw PreconditionError("a_compatible_projector: need n_b >= n_a");
    const Index d = n_a * n_b;
    ComplexMatrix p = ComplexMatrix::Zero(d * d, d * d);
    for (Index k : compatible_indices(n_a, n_b))
        p(k, k) = 1.0;
    return p;
}

ComplexMatrix reduced_superoperator(const Lindbladian &l, Index n_a) {
    if (l.n_a != n_a || l.n_b < n_a)
        throw PreconditionError("reduced_superoperator: expects n_a matching the Lindbladian and n_b >= n_a");
    const ComplexMatrix s = build_superoperator(l);
    const auto keep = compatible_indices(n_a, l.n_b);
    const auto k = static_cast<Index>(keep.size());
    ComplexMatrix out(k, k);
    for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < k; ++i)
            out(i, j) = s(keep[i], keep[j]);
    return out;
}

CqaResult cqa_construct(const std::vector<ComplexMatrix> &as, const SchmidtState &state) {
    if (as.empty())
        throw PreconditionError("cqa_construct: need at least one jump");
    if (state.n_a() != state.n_b())
        throw PreconditionError("cqa_construct: equal dimensions required");
    require_full_rank(state, "cqa_construct", "a full-rank state");
    const Index n = state.size();
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (std::abs(state.weight(i) - state.weight(j)) <= 1e-9)
                throw PreconditionError(
                    fmt::format("cqa_construct: Schmidt weights {} and {} are degenerate", i, j));

    const ComplexMatrix rho_a = state.reduced_density();
    ComplexMatrix dissipated = ComplexMatrix::Zero(n, n);
    ComplexMatrix decay = ComplexMatrix::Zero(n, n);
    for (const auto &a : as) {
        if (a.rows() != n || a.cols() != n)
            throw PreconditionError("cqa_construct: jump has wrong dimension");
        const double defect = (a - conjugate_by_psi(a.transpose(), state)).norm();
        if (defect > 1e-9 * std::max(1.0, a.norm()))
            throw PreconditionError(
                fmt::format("cqa_construct: jump violates detailed balance (defect {:.3e})", defect));
        const ComplexMatrix k = a.adjoint() * a;
        dissipated += a * rho_a * a.adjoint() - 0.5 * (k * rho_a + rho_a * k);
        decay += k;
    }

    CqaResult out;
    out.h_a = ComplexMatrix::Zero(n, n);
    for (Index m = 0; m < n; ++m)
        for (Index k = 0; k < n; ++k)
            if (k != m)
                out.h_a(k, m) = -I_UNIT * dissipated(k, m) / (state.weight(m) - state.weight(k));

    const ComplexMatrix half = -0.5 * conjugate_by_psi((out.h_a - 0.5 * I_UNIT * decay).transpose(), state);
    out.h_b = half + half.adjoint();

    const ComplexMatrix id = ComplexMatrix::Identity(n, n);
    out.h_ab = ComplexMatrix::Zero(n * n, n * n);
    for (const auto &a : as) {
        const ComplexMatrix b = -a;
        out.h_ab += 0.5 * I_UNIT * (linalg::kron(a.adjoint(), b) - linalg::kron(a, b.adjoint()));
    }

    out.full = empty_lindbladian(n, n);
    ComplexMatrix h = linalg::kron(out.h_a, id) + linalg::kron(id, out.h_b) + out.h_ab;
    out.full.hamiltonian = 0.5 * (h + h.adjoint());
    for (const auto &a : as)
        out.full.jumps.push_back({a, -a, 1.0});

    out.system_a = empty_lindbladian(n, 1);
    out.system_a.hamiltonian = out.h_a;
    for (const auto &a : as)
        out.system_a.jumps.push_back({a, ComplexMatrix::Zero(1, 1), 1.0});
    return out;
}

CqaResult cqa_construct(const ComplexMatrix &a, const SchmidtState &state) {
    return cqa_construct(std::vector<ComplexMatrix>{a}, state);
}

} // namespace forge
