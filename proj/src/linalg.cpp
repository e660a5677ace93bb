#include "forge/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <arpack/arpack.h>

namespace forge::linalg {

namespace {

constexpr double kConditionFlag = 1e8;

// Taylor steps are taken with ||A||_1 / s below this.
constexpr double kTaylorTheta = 3.5;
constexpr int kTaylorMaxTerms = 60;

bool descending_real(const cplx &x, const cplx &y) {
    if (x.real() != y.real())
        return x.real() > y.real();
    return x.imag() > y.imag();
}

std::vector<Index> sort_order(const std::vector<cplx> &w) {
    std::vector<Index> order(w.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index i, Index j) { return descending_real(w[i], w[j]); });
    return order;
}

double inf_norm(const ComplexMatrix &m) {
    if (m.size() == 0)
        return 0.0;
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

} // namespace

ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

ComplexVector vectorize(const ComplexMatrix &rho) {
    require_square(rho, "vectorize");
    return Eigen::Map<const ComplexVector>(rho.data(), rho.size());
}

ComplexMatrix devectorize(const ComplexVector &v) {
    const auto dim = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    if (dim * dim != v.size())
        throw PreconditionError(fmt::format("devectorize: length {} is not a perfect square", v.size()));
    return devectorize(v, dim);
}

ComplexMatrix devectorize(const ComplexVector &v, Index dim) {
    if (dim * dim != v.size())
        throw PreconditionError(fmt::format("devectorize: length {} does not match dim {}", v.size(), dim));
    return Eigen::Map<const ComplexMatrix>(v.data(), dim, dim);
}

bool all_finite(const ComplexMatrix &m) {
    for (Index k = 0; k < m.size(); ++k)
        if (!std::isfinite(m.data()[k].real()) || !std::isfinite(m.data()[k].imag()))
            return false;
    return true;
}

void require_finite(const ComplexMatrix &m, std::string_view what) {
    if (!all_finite(m))
        throw PreconditionError(fmt::format("{}: matrix has non-finite entries", what));
}

void require_square(const ComplexMatrix &m, std::string_view what) {
    if (m.rows() != m.cols())
        throw PreconditionError(fmt::format("{}: expected square matrix, got {}x{}", what, m.rows(), m.cols()));
}

RealVector singular_values(const ComplexMatrix &m) {
    const Index k = std::min(m.rows(), m.cols());
    RealVector s(k);
    if (k == 0)
        return s;
    ComplexMatrix work = m;
    lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', static_cast<lapack_int>(m.rows()),
                                     static_cast<lapack_int>(m.cols()), work.data(),
                                     static_cast<lapack_int>(m.rows()), s.data(), nullptr, 1, nullptr, 1);
    if (info != 0)
        throw NumericalError(fmt::format("zgesdd failed, info = {}", info));
    return s;
}

double spectral_norm(const ComplexMatrix &m) {
    if (m.size() == 0)
        return 0.0;
    return singular_values(m)(0);
}

double one_norm(const ComplexMatrix &m) {
    if (m.size() == 0)
        return 0.0;
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

double EigenDecomposition::residual_max() const {
    double r = 0.0;
    for (double x : residuals)
        r = std::max(r, x);
    return r;
}

bool EigenDecomposition::any_flagged() const {
    return std::any_of(flagged.begin(), flagged.end(), [](bool f) { return f; });
}

void sort_descending_real(std::vector<cplx> &values) {
    std::stable_sort(values.begin(), values.end(), descending_real);
}

EigenDecomposition eig_general(const ComplexMatrix &m, bool with_conditions) {
    require_square(m, "eig_general");
    require_finite(m, "eig_general");
    const Index n = m.rows();
    EigenDecomposition out;
    out.matrix_norm = m.norm();
    if (n == 0)
        return out;

    ComplexMatrix work = m;
    ComplexVector w(n);
    ComplexMatrix vr(n, n);
    ComplexMatrix vl;
    if (with_conditions)
        vl.resize(n, n);
    const auto ln = static_cast<lapack_int>(n);
    lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, with_conditions ? 'V' : 'N', 'V', ln, work.data(), ln,
                                    w.data(), with_conditions ? vl.data() : nullptr, ln, vr.data(), ln);
    if (info < 0)
        throw NumericalError(fmt::format("zgeev: illegal argument {}", -info));
    if (info > 0)
        throw NumericalError(fmt::format("zgeev: QR iteration failed to converge; {} of {} eigenvalues "
                                         "unconverged (info = {})",
                                         info, n, info));

    std::vector<cplx> raw(w.data(), w.data() + n);
    const auto order = sort_order(raw);
    out.values.resize(n);
    out.vectors.resize(n, n);
    out.residuals.resize(n);
    out.flagged.resize(n);
    if (with_conditions)
        out.conditions.resize(n);

    ComplexMatrix mv = m * vr;
    const double tol = kEigResidualTol * std::max(out.matrix_norm, 1e-300);
    for (Index k = 0; k < n; ++k) {
        const Index src = order[k];
        out.values[k] = raw[src];
        out.vectors.col(k) = vr.col(src);
        out.residuals[k] = (mv.col(src) - raw[src] * vr.col(src)).norm();
        bool flag = out.residuals[k] > tol;
        if (with_conditions) {
            const double overlap = std::abs(vl.col(src).dot(vr.col(src)));
            out.conditions[k] = overlap > 0.0 ? 1.0 / overlap : std::numeric_limits<double>::infinity();
            flag = flag || out.conditions[k] > kConditionFlag;
        }
        out.flagged[k] = flag;
    }
    return out;
}

std::vector<cplx> eigvals_general(const ComplexMatrix &m) {
    require_square(m, "eigvals_general");
    require_finite(m, "eigvals_general");
    const Index n = m.rows();
    if (n == 0)
        return {};
    ComplexMatrix work = m;
    ComplexVector w(n);
    const auto ln = static_cast<lapack_int>(n);
    lapack_int info =
        LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', ln, work.data(), ln, w.data(), nullptr, 1, nullptr, 1);
    if (info != 0)
        throw NumericalError(fmt::format("zgeev: failed to converge (info = {})", info));
    std::vector<cplx> values(w.data(), w.data() + n);
    sort_descending_real(values);
    return values;
}

ComplexMatrix expm_apply(const ComplexMatrix &m, const ComplexMatrix &block, double t) {
    require_square(m, "expm_apply");
    if (block.rows() != m.rows())
        throw PreconditionError(
            fmt::format("expm_apply: operand has {} rows, matrix is {}x{}", block.rows(), m.rows(), m.cols()));
    if (!(t >= 0.0))
        throw PreconditionError(fmt::format("expm_apply: negative time t = {}", t));
    if (t == 0.0 || m.rows() == 0)
        return block;

    const Index n = m.rows();
    const cplx mu = m.trace() / static_cast<double>(n);
    ComplexMatrix a = m;
    a.diagonal().array() -= mu;
    a *= t;
    const double norm = one_norm(a);
    const int steps = std::max(1, static_cast<int>(std::ceil(norm / kTaylorTheta)));
    const cplx eta = std::exp(mu * t / static_cast<double>(steps));

    ComplexMatrix f = block;
    for (int s = 0; s < steps; ++s) {
        ComplexMatrix term = f;
        double c1 = inf_norm(term);
        for (int k = 1; k <= kTaylorMaxTerms; ++k) {
            term = (a * term) / static_cast<double>(steps * k);
            f += term;
            const double c2 = inf_norm(term);
            if (c1 + c2 <= 1e-16 * inf_norm(f))
                break;
            c1 = c2;
        }
        f *= eta;
    }
    return f;
}

ComplexVector expm_apply(const ComplexMatrix &m, const ComplexVector &v, double t) {
    ComplexMatrix block = v;
    return expm_apply(m, block, t).col(0);
}

ComplexMatrix null_space(const ComplexMatrix &m, double tol) {
    require_square(m, "null_space");
    if (!(tol > 0.0))
        throw PreconditionError("null_space: tolerance must be positive");
    const Index n = m.rows();
    if (n == 0)
        return ComplexMatrix(0, 0);
    ComplexMatrix work = m;
    RealVector s(n);
    ComplexMatrix u(n, n), vt(n, n);
    const auto ln = static_cast<lapack_int>(n);
    lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'A', ln, ln, work.data(), ln, s.data(), u.data(), ln,
                                     vt.data(), ln);
    if (info != 0)
        throw NumericalError(fmt::format("zgesdd failed, info = {}", info));
    const double cut = tol * s(0);
    Index first = n;
    for (Index k = 0; k < n; ++k) {
        if (s(k) <= cut) {
            first = k;
            break;
        }
    }
    // rows of V^H are the right singular vectors
    return vt.bottomRows(n - first).adjoint();
}

PartialSpectrum eigs_near_zero(const ComplexMatrix &m, const ComplexVector &r, const ComplexVector &l,
                               int count) {
    require_square(m, "eigs_near_zero");
    const Index n = m.rows();
    if (r.size() != n || l.size() != n)
        throw PreconditionError("eigs_near_zero: kernel vectors have wrong length");
    const cplx lr = l.dot(r);
    if (std::abs(lr) < 1e-12 * l.norm() * r.norm())
        throw PreconditionError("eigs_near_zero: left and right kernel vectors are orthogonal");
    if (count < 1)
        throw PreconditionError("eigs_near_zero: count must be positive");

    // Brauer shift: m - c r l^H / (l^H r) keeps every eigenvalue but moves zero to -c.
    const double c = std::max(one_norm(m), 1.0);
    const ComplexVector rs = r / std::conj(lr);
    ComplexMatrix lu = m;
    lu.noalias() -= c * rs * l.adjoint();

    std::vector<lapack_int> piv(n);
    const auto ln = static_cast<lapack_int>(n);
    lapack_int info = LAPACKE_zgetrf(LAPACK_COL_MAJOR, ln, ln, lu.data(), ln, piv.data());
    if (info < 0)
        throw NumericalError(fmt::format("zgetrf: illegal argument {}", -info));

    PartialSpectrum out;
    if (info > 0) {
        // exactly singular after deflation: a second zero mode
        out.values.push_back(cplx{0.0, 0.0});
        out.residuals.push_back(0.0);
        return out;
    }

    const int k = std::min<int>(count, static_cast<int>(n) - 1);
    const int max_dim = static_cast<int>(std::min<Index>(n - 1, 300));
    ComplexMatrix v(n, max_dim + 1);
    ComplexMatrix h = ComplexMatrix::Zero(max_dim + 1, max_dim);

    ComplexVector start(n);
    for (Index i = 0; i < n; ++i)
        start(i) = cplx{std::sin(1.0 + static_cast<double>(i)), std::cos(2.0 * static_cast<double>(i) + 0.5)};
    // start orthogonal to the identity functional so the shifted mode is not excited
    start -= rs * l.dot(start);
    v.col(0) = start.normalized();

    auto solve = [&](ComplexVector &x) {
        LAPACKE_zgetrs(LAPACK_COL_MAJOR, 'N', ln, 1, lu.data(), ln, piv.data(), x.data(), ln);
    };

    Eigen::ComplexEigenSolver<ComplexMatrix> ritz;
    int dim = 0;
    bool converged = false;
    for (int j = 0; j < max_dim; ++j) {
        ComplexVector w = v.col(j);
        solve(w);
        for (int pass = 0; pass < 2; ++pass) {
            ComplexVector coeff = v.leftCols(j + 1).adjoint() * w;
            w.noalias() -= v.leftCols(j + 1) * coeff;
            h.col(j).head(j + 1) += coeff;
        }
        const double beta = w.norm();
        h(j + 1, j) = beta;
        dim = j + 1;
        const bool breakdown = beta < 1e-14 * h.col(j).head(j + 1).norm();
        if (!breakdown)
            v.col(j + 1) = w / beta;

        if (breakdown || (dim >= 2 * k && dim % 10 == 0) || dim == max_dim) {
            ritz.compute(h.topLeftCorner(dim, dim));
            const ComplexVector mu = ritz.eigenvalues();
            std::vector<Index> idx(dim);
            std::iota(idx.begin(), idx.end(), Index{0});
            std::sort(idx.begin(), idx.end(), [&](Index a, Index b) { return std::abs(mu(a)) > std::abs(mu(b)); });
            const double scale = std::abs(mu(idx[0]));
            bool ok = true;
            for (int q = 0; q < std::min(k, dim); ++q) {
                const ComplexVector y = ritz.eigenvectors().col(idx[q]);
                const double est = beta * std::abs(y(dim - 1)) / y.norm();
                if (est > 1e-11 * scale)
                    ok = false;
            }
            if (ok || breakdown || dim == max_dim) {
                converged = ok || breakdown;
                break;
            }
        }
    }
    (void)converged;

    const ComplexVector mu = ritz.eigenvalues();
    std::vector<Index> idx(dim);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::sort(idx.begin(), idx.end(), [&](Index a, Index b) { return std::abs(mu(a)) > std::abs(mu(b)); });
    std::vector<std::pair<cplx, double>> pairs;
    for (int q = 0; q < std::min(k, dim); ++q) {
        const cplx lambda = 1.0 / mu(idx[q]);
        ComplexVector x = v.leftCols(dim) * ritz.eigenvectors().col(idx[q]);
        x.normalize();
        const double res = (m * x - lambda * x).norm();
        pairs.emplace_back(lambda, res);
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const auto &a, const auto &b) { return descending_real(a.first, b.first); });
    for (const auto &[val, res] : pairs) {
        out.values.push_back(val);
        out.residuals.push_back(res);
    }
    out.krylov_dim = dim;
    return out;
}

PartialSpectrum eigs_rightmost(const LinearOperator &op, Index n, int count, double tol, int max_restarts) {
    if (n < 2)
        throw PreconditionError("eigs_rightmost: dimension must be at least 2");
    if (count < 1 || count > n - 2)
        throw PreconditionError(fmt::format("eigs_rightmost: count {} outside [1, {}]", count, n - 2));
    using Z = double _Complex;
    const a_int nn = static_cast<a_int>(n);
    const a_int nev = count;
    const a_int ncv = static_cast<a_int>(std::min<Index>(n, std::max(2 * count + 1, 40)));
    const a_int lworkl = 3 * ncv * ncv + 5 * ncv;

    ComplexVector resid(n);
    for (Index i = 0; i < n; ++i)
        resid(i) = cplx{std::sin(1.0 + static_cast<double>(i)), std::cos(2.0 * static_cast<double>(i) + 0.5)};
    ComplexMatrix v(n, ncv);
    ComplexVector workd(3 * n), workl(lworkl);
    std::vector<double> rwork(static_cast<std::size_t>(ncv));
    a_int iparam[11] = {};
    a_int ipntr[14] = {};
    iparam[0] = 1; // exact shifts
    iparam[2] = max_restarts;
    iparam[6] = 1; // mode 1: standard problem
    a_int ido = 0, info = 1;

    ComplexVector x(n), y(n);
    while (true) {
        znaupd_c(&ido, "I", nn, "LR", nev, tol, reinterpret_cast<Z *>(resid.data()), ncv,
                 reinterpret_cast<Z *>(v.data()), nn, iparam, ipntr, reinterpret_cast<Z *>(workd.data()),
                 reinterpret_cast<Z *>(workl.data()), lworkl, rwork.data(), &info);
        if (ido != 1 && ido != -1)
            break;
        x = workd.segment(ipntr[0] - 1, n);
        op(x, y);
        workd.segment(ipntr[1] - 1, n) = y;
    }
    if (info < 0)
        throw NumericalError(fmt::format("znaupd: error {}", info));
    if (iparam[4] < nev)
        throw NumericalError(fmt::format("znaupd: {} of {} eigenvalues converged after {} restarts", iparam[4],
                                         nev, iparam[2]));

    std::vector<a_int> select(static_cast<std::size_t>(ncv));
    ComplexVector d(nev + 1), workev(2 * ncv);
    ComplexMatrix z(n, nev);
    Z sigma = 0.0;
    zneupd_c(1, "A", select.data(), reinterpret_cast<Z *>(d.data()), reinterpret_cast<Z *>(z.data()), nn, sigma,
             reinterpret_cast<Z *>(workev.data()), "I", nn, "LR", nev, tol, reinterpret_cast<Z *>(resid.data()), ncv,
             reinterpret_cast<Z *>(v.data()), nn, iparam, ipntr, reinterpret_cast<Z *>(workd.data()),
             reinterpret_cast<Z *>(workl.data()), lworkl, rwork.data(), &info);
    if (info != 0)
        throw NumericalError(fmt::format("zneupd: error {}", info));

    std::vector<std::pair<cplx, double>> pairs;
    for (Index q = 0; q < nev; ++q) {
        x = z.col(q).normalized();
        op(x, y);
        pairs.emplace_back(d(q), (y - d(q) * x).norm());
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const auto &a, const auto &b) { return descending_real(a.first, b.first); });
    PartialSpectrum out;
    for (const auto &[val, res] : pairs) {
        out.values.push_back(val);
        out.residuals.push_back(res);
    }
    out.krylov_dim = static_cast<int>(ncv);
    return out;
}

} // namespace forge::linalg
