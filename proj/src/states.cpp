#include "forge/states.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace forge {

SchmidtState SchmidtState::from_weights(std::vector<double> weights, Index n_a, Index n_b) {
    if (n_a < 1 || n_b < 1)
        throw PreconditionError("SchmidtState: dimensions must be positive");
    if (static_cast<Index>(weights.size()) != std::min(n_a, n_b))
        throw PreconditionError(fmt::format("SchmidtState: {} weights for dimensions {}x{}", weights.size(), n_a, n_b));
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < -kWeightFloor)
            throw PreconditionError(fmt::format("SchmidtState: invalid weight {}", w));
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-10)
        throw PreconditionError(fmt::format("SchmidtState: weights sum to {}, not 1", total));

    SchmidtState s;
    s.n_a_ = n_a;
    s.n_b_ = n_b;
    for (double &w : weights) {
        if (w < kWeightFloor) {
            w = 0.0;
            s.rank_deficient_ = true;
        }
    }
    std::stable_sort(weights.begin(), weights.end(), std::greater<>());
    const double norm = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double &w : weights)
        w /= norm;
    s.p_ = std::move(weights);
    return s;
}

SchmidtState SchmidtState::from_weights(std::vector<double> weights) {
    const auto n = static_cast<Index>(weights.size());
    return from_weights(std::move(weights), n, n);
}

SchmidtState SchmidtState::uniform(Index n) {
    if (n < 1)
        throw PreconditionError("SchmidtState: dimension must be positive");
    return from_weights(std::vector<double>(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n)), n, n);
}

ComplexVector SchmidtState::to_vector() const {
    ComplexVector psi = ComplexVector::Zero(n_a_ * n_b_);
    for (Index i = 0; i < size(); ++i)
        psi(i * n_b_ + i) = std::sqrt(weight(i));
    return psi;
}

ComplexMatrix SchmidtState::reduced_density() const {
    ComplexMatrix rho = ComplexMatrix::Zero(n_a_, n_a_);
    for (Index i = 0; i < size(); ++i)
        rho(i, i) = weight(i);
    return rho;
}

SchmidtDecomposition schmidt_from_vector(const ComplexVector &psi, Index n_a, Index n_b) {
    if (psi.size() != n_a * n_b)
        throw PreconditionError(fmt::format("schmidt_from_vector: length {} != {}*{}", psi.size(), n_a, n_b));
    const double norm = psi.norm();
    if (std::abs(norm - 1.0) > 1e-10)
        throw PreconditionError(fmt::format("schmidt_from_vector: state norm is {}, expected 1", norm));

    ComplexMatrix c(n_a, n_b);
    for (Index i = 0; i < n_a; ++i)
        for (Index j = 0; j < n_b; ++j)
            c(i, j) = psi(i * n_b + j);
    Eigen::JacobiSVD<ComplexMatrix> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RealVector &sv = svd.singularValues();
    std::vector<double> p(static_cast<std::size_t>(sv.size()));
    for (Index k = 0; k < sv.size(); ++k)
        p[static_cast<std::size_t>(k)] = sv(k) * sv(k);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double &w : p)
        w /= total;
    return {SchmidtState::from_weights(std::move(p), n_a, n_b), svd.matrixU(), svd.matrixV().conjugate()};
}

double delta_e2_of(const std::vector<double> &p) {
    double purity = 0.0;
    for (double w : p)
        purity += w * w;
    return purity - 1.0 / static_cast<double>(p.size());
}

EntanglementMeasures measures(const SchmidtState &s) {
    const auto &p = s.weights();
    const double n = static_cast<double>(p.size());
    double purity = 0.0;
    for (double w : p)
        purity += w * w;
    EntanglementMeasures m;
    m.renyi2 = -std::log(purity);
    m.delta_e2 = purity - 1.0 / n;
    m.scaled_e2 = p.size() > 1 ? (1.0 - purity) / (1.0 - 1.0 / n) : 1.0;
    m.p_min = s.p_min();
    return m;
}

ComplexMatrix psi_operator(const SchmidtState &s) {
    ComplexMatrix psi = ComplexMatrix::Zero(s.size(), s.size());
    for (Index i = 0; i < s.size(); ++i)
        psi(i, i) = std::sqrt(s.weight(i));
    return psi;
}

namespace {

std::vector<double> boltzmann(const std::vector<double> &lambda, double beta) {
    const double lmin = *std::min_element(lambda.begin(), lambda.end());
    std::vector<double> p(lambda.size());
    double z = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        p[i] = std::exp(-beta * (lambda[i] - lmin));
        z += p[i];
    }
    for (double &w : p)
        w /= z;
    return p;
}

} // namespace

SchmidtState sample_schmidt_fixed_e2(Index n, double target, Rng &rng) {
    if (n < 1)
        throw PreconditionError("sample_schmidt_fixed_e2: n must be positive");
    const double max_delta = 1.0 - 1.0 / static_cast<double>(n);
    if (!(target >= 0.0) || target > max_delta + 1e-15)
        throw PreconditionError(
            fmt::format("sample_schmidt_fixed_e2: target {} outside [0, 1 - 1/n = {}]", target, max_delta));

    std::vector<double> lambda(static_cast<std::size_t>(n));
    for (double &l : lambda)
        l = rng.normal();
    const double mean = std::accumulate(lambda.begin(), lambda.end(), 0.0) / static_cast<double>(n);
    for (double &l : lambda)
        l -= mean;

    if (target == 0.0 || n == 1)
        return SchmidtState::uniform(n);
    if (target >= max_delta - 1e-12) {
        // beta -> infinity limit: all weight on the lowest lambda
        std::vector<double> p(static_cast<std::size_t>(n), 0.0);
        p[static_cast<std::size_t>(std::min_element(lambda.begin(), lambda.end()) - lambda.begin())] = 1.0;
        return SchmidtState::from_weights(std::move(p));
    }

    auto delta = [&](double beta) { return delta_e2_of(boltzmann(lambda, beta)); };
    double lo = 0.0;
    double hi = 1.0;
    while (delta(hi) < target) {
        hi *= 2.0;
        if (hi > 1e300)
            throw NumericalError("sample_schmidt_fixed_e2: could not bracket beta");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (delta(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double beta = 0.5 * (lo + hi);
    auto p = boltzmann(lambda, beta);
    const double got = delta_e2_of(p);
    if (std::abs(got - target) > 1e-10)
        throw NumericalError(
            fmt::format("sample_schmidt_fixed_e2: bisection reached {} for target {}", got, target));
    return SchmidtState::from_weights(std::move(p));
}

ComplexMatrix partial_trace_b(const ComplexMatrix &rho, Index n_a, Index n_b) {
    ComplexMatrix out = ComplexMatrix::Zero(n_a, n_a);
    for (Index i = 0; i < n_a; ++i)
        for (Index k = 0; k < n_a; ++k)
            for (Index j = 0; j < n_b; ++j)
                out(i, k) += rho(i * n_b + j, k * n_b + j);
    return out;
}

ComplexMatrix partial_trace_a(const ComplexMatrix &rho, Index n_a, Index n_b) {
    ComplexMatrix out = ComplexMatrix::Zero(n_b, n_b);
    for (Index j = 0; j < n_b; ++j)
        for (Index l = 0; l < n_b; ++l)
            for (Index i = 0; i < n_a; ++i)
                out(j, l) += rho(i * n_b + j, i * n_b + l);
    return out;
}

} // namespace forge
