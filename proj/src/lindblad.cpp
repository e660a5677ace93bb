#include "forge/lindblad.hpp"

#include "forge/states.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace forge {

namespace {

double hermiticity_defect(const ComplexMatrix &h) { return (h - h.adjoint()).norm(); }

bool is_hermitian(const ComplexMatrix &h, double tol) {
    return hermiticity_defect(h) <= tol * std::max(1.0, h.norm());
}

// s += alpha * (1_D (x) x)
void add_identity_kron(ComplexMatrix &s, cplx alpha, const ComplexMatrix &x) {
    const Index d = x.rows();
    for (Index k = 0; k < d; ++k)
        s.block(k * d, k * d, d, d) += alpha * x;
}

// s += alpha * (x (x) 1_D)
void add_kron_identity(ComplexMatrix &s, cplx alpha, const ComplexMatrix &x) {
    const Index d = x.rows();
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < d; ++i) {
            const cplx c = alpha * x(i, j);
            if (c == cplx{0.0, 0.0})
                continue;
            s.block(i * d, j * d, d, d).diagonal().array() += c;
        }
}

// s += x (x) y
void add_kron(ComplexMatrix &s, const ComplexMatrix &x, const ComplexMatrix &y) {
    const Index d = y.rows();
    for (Index j = 0; j < x.cols(); ++j)
        for (Index i = 0; i < x.rows(); ++i) {
            const cplx c = x(i, j);
            if (c == cplx{0.0, 0.0})
                continue;
            s.block(i * d, j * d, d, d) += c * y;
        }
}

double rate_scale(const Lindbladian &l) {
    double total = 0.0;
    for (const auto &j : l.jumps) {
        const ComplexMatrix full = j.full();
        total += full.size() ? full.cwiseAbs2().maxCoeff() : 0.0;
    }
    const double mean = l.jumps.empty() ? 0.0 : total / static_cast<double>(l.jumps.size());
    return mean > 0.0 ? mean : 1.0;
}

ComplexMatrix pure_density(const ComplexVector &psi) { return psi * psi.adjoint(); }

void require_normalized(const ComplexVector &psi, Index dim, const char *what) {
    if (psi.size() != dim)
        throw PreconditionError(fmt::format("{}: state has length {}, expected {}", what, psi.size(), dim));
    if (std::abs(psi.norm() - 1.0) > 1e-10)
        throw PreconditionError(fmt::format("{}: state norm {} is not 1", what, psi.norm()));
}

} // namespace

ComplexMatrix JumpOperator::full() const {
    const Index na = a.rows();
    const Index nb = b.rows();
    ComplexMatrix l = linalg::kron(a, ComplexMatrix::Identity(nb, nb)) + linalg::kron(ComplexMatrix::Identity(na, na), b);
    return std::sqrt(kappa) * l;
}

void Lindbladian::validate() const {
    if (n_a < 1 || n_b < 1)
        throw PreconditionError("Lindbladian: dimensions must be positive");
    if (dim() > kMaxHilbertDim)
        throw PreconditionError(
            fmt::format("Lindbladian: Hilbert dimension {} exceeds the dense limit {}", dim(), kMaxHilbertDim));
    if (hamiltonian.rows() != dim() || hamiltonian.cols() != dim())
        throw PreconditionError(fmt::format("Lindbladian: Hamiltonian is {}x{}, expected {}x{}", hamiltonian.rows(),
                                            hamiltonian.cols(), dim(), dim()));
    linalg::require_finite(hamiltonian, "Lindbladian Hamiltonian");
    if (!is_hermitian(hamiltonian, 1e-12))
        throw PreconditionError(
            fmt::format("Lindbladian: Hamiltonian not Hermitian (defect {:.3e})", hermiticity_defect(hamiltonian)));
    for (std::size_t k = 0; k < jumps.size(); ++k) {
        const auto &j = jumps[k];
        if (j.a.rows() != n_a || j.a.cols() != n_a || j.b.rows() != n_b || j.b.cols() != n_b)
            throw PreconditionError(fmt::format("Lindbladian: jump {} has blocks {}x{} and {}x{}, expected {} and {}",
                                                k, j.a.rows(), j.a.cols(), j.b.rows(), j.b.cols(), n_a, n_b));
        if (!(j.kappa >= 0.0) || !std::isfinite(j.kappa))
            throw PreconditionError(fmt::format("Lindbladian: jump {} has invalid rate {}", k, j.kappa));
        linalg::require_finite(j.a, "jump operator");
        linalg::require_finite(j.b, "jump operator");
    }
}

std::vector<ComplexMatrix> Lindbladian::full_jumps() const {
    std::vector<ComplexMatrix> out;
    out.reserve(jumps.size());
    for (const auto &j : jumps)
        out.push_back(j.full());
    return out;
}

double Lindbladian::mean_kappa() const {
    if (jumps.empty())
        return 0.0;
    double total = 0.0;
    for (const auto &j : jumps)
        total += j.kappa * (j.a.size() ? j.a.cwiseAbs2().maxCoeff() : 0.0);
    return total / static_cast<double>(jumps.size());
}

Lindbladian empty_lindbladian(Index n_a, Index n_b) {
    Lindbladian l;
    l.n_a = n_a;
    l.n_b = n_b;
    l.hamiltonian = ComplexMatrix::Zero(n_a * n_b, n_a * n_b);
    return l;
}

ComplexMatrix build_superoperator(const Lindbladian &l) {
    l.validate();
    const Index d = l.dim();
    ComplexMatrix s = ComplexMatrix::Zero(d * d, d * d);
    const ComplexMatrix &h = l.hamiltonian;
    add_identity_kron(s, -I_UNIT, h);
    add_kron_identity(s, I_UNIT, h.transpose());
    for (const auto &jump : l.jumps) {
        const ComplexMatrix op = jump.full();
        const ComplexMatrix k = op.adjoint() * op;
        add_kron(s, op.conjugate(), op);
        add_identity_kron(s, -0.5, k);
        add_kron_identity(s, -0.5, k.transpose());
    }
    return s;
}

ComplexMatrix apply_lindbladian(const Lindbladian &l, const ComplexMatrix &rho) {
    l.validate();
    const ComplexMatrix &h = l.hamiltonian;
    ComplexMatrix out = -I_UNIT * (h * rho - rho * h);
    for (const auto &jump : l.jumps) {
        const ComplexMatrix op = jump.full();
        const ComplexMatrix k = op.adjoint() * op;
        out += op * rho * op.adjoint() - 0.5 * (k * rho + rho * k);
    }
    return out;
}

ComplexMatrix apply_adjoint(const Lindbladian &l, const ComplexMatrix &x) {
    l.validate();
    const ComplexMatrix &h = l.hamiltonian;
    ComplexMatrix out = I_UNIT * (h * x - x * h);
    for (const auto &jump : l.jumps) {
        const ComplexMatrix op = jump.full();
        const ComplexMatrix k = op.adjoint() * op;
        out += op.adjoint() * x * op - 0.5 * (k * x + x * k);
    }
    return out;
}

void classify_spectrum(SpectrumResult &r, double abs_tol, int known_steady) {
    r.tolerance = abs_tol;
    r.steady_count = known_steady;
    std::optional<cplx> first_decaying;
    for (const auto &lam : r.eigenvalues) {
        if (std::abs(lam) <= abs_tol)
            ++r.steady_count;
        else if (!first_decaying)
            first_decaying = lam;
    }
    if (r.steady_count >= 2 || !first_decaying)
        r.gap = 0.0;
    else
        r.gap = std::max(0.0, -first_decaying->real());
    r.residual_max = 0.0;
    for (double x : r.residuals)
        r.residual_max = std::max(r.residual_max, x);
}

SpectrumResult spectrum_of(const ComplexMatrix &superop, double kappa_bar, double tol) {
    const auto eig = linalg::eig_general(superop, false);
    SpectrumResult r;
    r.eigenvalues = eig.values;
    r.residuals = eig.residuals;
    r.flagged = eig.any_flagged();
    classify_spectrum(r, tol * kappa_bar);
    return r;
}

SpectrumResult spectrum(const Lindbladian &l, double tol) {
    return spectrum_of(build_superoperator(l), rate_scale(l), tol);
}

SpectrumResult slow_spectrum(const Lindbladian &l, const ComplexVector &psi, int count, double tol) {
    require_normalized(psi, l.dim(), "slow_spectrum");
    const double scale = rate_scale(l);
    const double res = steady_residual(l, psi);
    if (res > 1e-8 * scale)
        throw PreconditionError(fmt::format("slow_spectrum: state is not steady (residual {:.3e})", res));

    // L(X) = G X + X G^+ + sum L X L^+ with G = -iH - K/2
    const Index d = l.dim();
    const std::vector<ComplexMatrix> ls = l.full_jumps();
    ComplexMatrix g = -I_UNIT * l.hamiltonian;
    double bound = 0.0;
    for (const auto &op : ls) {
        g -= 0.5 * op.adjoint() * op;
        bound += op.squaredNorm();
    }
    bound += 2.0 * g.norm();
    // the trace-preserving zero mode is moved to -shift, left of everything else
    const double shift = bound + 1.0;
    const ComplexMatrix rho_ss = pure_density(psi);
    const ComplexMatrix g_adj = g.adjoint();

    auto apply = [&](const ComplexVector &xv, ComplexVector &yv) {
        const Eigen::Map<const ComplexMatrix> x(xv.data(), d, d);
        Eigen::Map<ComplexMatrix> y(yv.data(), d, d);
        y.noalias() = g * x;
        y.noalias() += x * g_adj;
        for (const auto &op : ls)
            y.noalias() += op * x * op.adjoint();
        y -= shift * x.trace() * rho_ss;
    };
    const auto part = linalg::eigs_rightmost(apply, d * d, count);

    SpectrumResult out;
    out.eigenvalues = part.values;
    out.residuals = part.residuals;
    out.partial = true;
    for (double x : part.residuals)
        if (x > linalg::kEigResidualTol * bound)
            out.flagged = true;
    classify_spectrum(out, tol * scale, 1);
    return out;
}

std::vector<ComplexMatrix> steady_states(const Lindbladian &l, double tol) {
    const ComplexMatrix s = build_superoperator(l);
    const ComplexMatrix kernel = linalg::null_space(s, tol);
    if (kernel.cols() == 0)
        throw NumericalError(
            fmt::format("steady_states: empty kernel at tolerance {:.1e}; the tolerance is too tight", tol));
    const Index d = l.dim();
    std::vector<ComplexMatrix> out;
    for (Index k = 0; k < kernel.cols(); ++k) {
        ComplexMatrix x = linalg::devectorize(kernel.col(k), d);
        const cplx tr = x.trace();
        if (std::abs(tr) > 1e-8 * x.norm()) {
            x *= std::conj(tr) / std::abs(tr);
            x = 0.5 * (x + x.adjoint()).eval();
            x /= x.trace().real();
        } else {
            Index at = 0;
            x.diagonal().cwiseAbs().maxCoeff(&at);
            if (std::abs(x(at, at)) > 0.0)
                x *= std::conj(x(at, at)) / std::abs(x(at, at));
            x = 0.5 * (x + x.adjoint()).eval();
        }
        out.push_back(x);
    }
    return out;
}

void require_density(const ComplexMatrix &rho, double tol, const char *what) {
    linalg::require_square(rho, what);
    if (!is_hermitian(rho, tol))
        throw PreconditionError(fmt::format("{}: density matrix is not Hermitian", what));
    if (std::abs(rho.trace() - 1.0) > tol)
        throw PreconditionError(fmt::format("{}: density matrix has trace {}", what, rho.trace().real()));
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol)
        throw PreconditionError(
            fmt::format("{}: density matrix has negative eigenvalue {}", what, es.eigenvalues().minCoeff()));
}

ComplexMatrix evolve_with(const ComplexMatrix &superop, const ComplexMatrix &rho0, double t) {
    if (t < 0.0)
        throw PreconditionError(fmt::format("evolve: negative time {}", t));
    require_density(rho0, 1e-10, "evolve");
    if (rho0.size() != superop.rows())
        throw PreconditionError("evolve: density matrix does not match the superoperator");
    return linalg::devectorize(linalg::expm_apply(superop, linalg::vectorize(rho0), t), rho0.rows());
}

ComplexMatrix evolve(const Lindbladian &l, const ComplexMatrix &rho0, double t) {
    if (t < 0.0)
        throw PreconditionError(fmt::format("evolve: negative time {}", t));
    return evolve_with(build_superoperator(l), rho0, t);
}

double fidelity_to_pure(const ComplexMatrix &rho, const ComplexVector &psi) {
    const double f = psi.dot(rho * psi).real();
    return std::clamp(f, 0.0, 1.0);
}

double steady_residual(const Lindbladian &l, const ComplexVector &psi) {
    return apply_lindbladian(l, pure_density(psi)).norm();
}

double fidelity_rate(const Lindbladian &l, const ComplexMatrix &rho, const ComplexVector &psi) {
    require_normalized(psi, l.dim(), "fidelity_rate");
    const double res = steady_residual(l, psi);
    if (res > 1e-8 * rate_scale(l))
        throw PreconditionError(fmt::format("fidelity_rate: state is not steady (residual {:.3e})", res));
    return psi.dot(apply_lindbladian(l, rho) * psi).real();
}

AbsorbingReport absorbing_norms(const Lindbladian &l, const ComplexVector &psi) {
    l.validate();
    require_normalized(psi, l.dim(), "absorbing_norms");
    AbsorbingReport rep;
    for (const auto &op : l.full_jumps()) {
        const ComplexVector up = op.adjoint() * psi;
        const ComplexVector down = op * psi;
        const double norm = up.squaredNorm();
        const double comm = psi.dot(op * up - op.adjoint() * down).real();
        rep.norms.push_back(norm);
        rep.commutators.push_back(comm);
        rep.dark_residuals.push_back(down.norm());
        if (std::abs(norm - comm) > 1e-9)
            rep.non_dark = true;
    }
    return rep;
}

SymmetryReport strong_symmetry_check(const Lindbladian &l, const ComplexVector &psi) {
    l.validate();
    require_normalized(psi, l.dim(), "strong_symmetry_check");
    const ComplexMatrix p = pure_density(psi);
    SymmetryReport rep;
    rep.hamiltonian_commutator = (p * l.hamiltonian - l.hamiltonian * p).norm();
    for (const auto &op : l.full_jumps()) {
        rep.jump_commutators.push_back((p * op - op * p).norm());
        const ComplexVector up = op.adjoint() * psi;
        const ComplexVector down = op * psi;
        rep.symmetry_error += up.squaredNorm() - down.squaredNorm();
    }
    return rep;
}

std::optional<JumpOperator> split_local(const ComplexMatrix &x, Index n_a, Index n_b, double tol) {
    if (x.rows() != n_a * n_b || x.cols() != n_a * n_b)
        return std::nullopt;
    const cplx tr = x.trace();
    JumpOperator j;
    j.a = partial_trace_b(x, n_a, n_b) / static_cast<double>(n_b);
    j.b = partial_trace_a(x, n_a, n_b) / static_cast<double>(n_a);
    j.b.diagonal().array() -= tr / static_cast<double>(n_a * n_b);
    j.kappa = 1.0;
    if ((j.full() - x).norm() > tol * std::max(1.0, x.norm()))
        return std::nullopt;
    return j;
}

namespace {

void check_mff_inputs(const ComplexMatrix &m_op, const ComplexMatrix &f_op) {
    linalg::require_square(m_op, "build_mff");
    linalg::require_square(f_op, "build_mff");
    if (m_op.rows() != f_op.rows())
        throw PreconditionError("build_mff: operators differ in dimension");
    if (!is_hermitian(m_op, 1e-12))
        throw PreconditionError("build_mff: measurement operator is not Hermitian");
    if (!is_hermitian(f_op, 1e-12))
        throw PreconditionError("build_mff: feedback operator is not Hermitian");
}

} // namespace

Lindbladian build_mff(const ComplexMatrix &m_op, const ComplexMatrix &f_op) {
    check_mff_inputs(m_op, f_op);
    const Index d = m_op.rows();
    Lindbladian l = empty_lindbladian(d, 1);
    l.hamiltonian = 0.5 * (f_op * m_op + m_op * f_op);
    l.hamiltonian = 0.5 * (l.hamiltonian + l.hamiltonian.adjoint()).eval();
    l.jumps.push_back({f_op - I_UNIT * m_op, ComplexMatrix::Zero(1, 1), 1.0});
    return l;
}

Lindbladian build_mff(const ComplexMatrix &m_op, const ComplexMatrix &f_op, Index n_a, Index n_b) {
    check_mff_inputs(m_op, f_op);
    if (m_op.rows() != n_a * n_b)
        throw PreconditionError("build_mff: operator dimension does not match n_a*n_b");
    auto jump = split_local(f_op - I_UNIT * m_op, n_a, n_b);
    if (!jump)
        throw PreconditionError("build_mff: F - iM is not a sum of local operators");
    Lindbladian l = empty_lindbladian(n_a, n_b);
    l.hamiltonian = 0.5 * (f_op * m_op + m_op * f_op);
    l.hamiltonian = 0.5 * (l.hamiltonian + l.hamiltonian.adjoint()).eval();
    l.jumps.push_back(*jump);
    return l;
}

double trace_distance(const ComplexMatrix &rho, const ComplexMatrix &sigma) {
    const ComplexMatrix diff = rho - sigma;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

std::vector<ComplexMatrix> default_probes(Index dim, int k, Rng &rng) {
    std::vector<ComplexMatrix> probes;
    for (Index i = 0; i < dim; ++i) {
        ComplexMatrix p = ComplexMatrix::Zero(dim, dim);
        p(i, i) = 1.0;
        probes.push_back(p);
    }
    for (int q = 0; q < k; ++q)
        probes.push_back(pure_density(rng.haar_state(dim)));
    return probes;
}

double mixing_time_estimate(const Lindbladian &l, double epsilon, const std::vector<ComplexMatrix> &probes,
                            double t_max, double dt) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw PreconditionError(fmt::format("mixing_time_estimate: epsilon {} outside (0, 1)", epsilon));
    if (!(dt > 0.0) || !(t_max >= 0.0))
        throw PreconditionError("mixing_time_estimate: need dt > 0 and t_max >= 0");
    if (probes.empty())
        throw PreconditionError("mixing_time_estimate: no probe states");
    const auto ss = steady_states(l);
    if (ss.size() != 1)
        throw PreconditionError(
            fmt::format("mixing_time_estimate: steady state is {}-fold degenerate", ss.size()));
    const ComplexMatrix &rho_ss = ss.front();
    const Index d = l.dim();

    ComplexMatrix block(d * d, static_cast<Index>(probes.size()));
    for (std::size_t k = 0; k < probes.size(); ++k) {
        require_density(probes[k], 1e-10, "mixing_time_estimate");
        block.col(static_cast<Index>(k)) = linalg::vectorize(probes[k]);
    }
    auto all_within = [&]() {
        for (Index k = 0; k < block.cols(); ++k)
            if (trace_distance(linalg::devectorize(block.col(k), d), rho_ss) > epsilon)
                return false;
        return true;
    };
    if (all_within())
        return 0.0;

    const ComplexMatrix s = build_superoperator(l);
    const bool cache = d * d <= 1024;
    ComplexMatrix step;
    if (cache)
        step = linalg::expm_apply(s, ComplexMatrix(ComplexMatrix::Identity(d * d, d * d)), dt);
    const auto n_steps = static_cast<long>(std::floor(t_max / dt + 1e-9));
    for (long n = 1; n <= n_steps; ++n) {
        block = cache ? (step * block).eval() : linalg::expm_apply(s, block, dt);
        if (all_within())
            return static_cast<double>(n) * dt;
    }
    return kNotReached;
}

} // namespace forge
