#pragma once

#include "forge/rng.hpp"
#include "forge/types.hpp"

#include <vector>

namespace forge {

inline constexpr double kWeightFloor = 1e-14;

// Schmidt weights of a bipartite pure state, in the Schmidt basis
// |psi> = sum_i sqrt(p_i) |i>_A |i>_B.
class SchmidtState {
public:
    // Weights are sorted descending, clamped below kWeightFloor and
    // renormalized. Their sum must be within 1e-10 of 1.
    static SchmidtState from_weights(std::vector<double> weights, Index n_a, Index n_b);
    static SchmidtState from_weights(std::vector<double> weights);
    static SchmidtState uniform(Index n);

    Index n_a() const { return n_a_; }
    Index n_b() const { return n_b_; }
    // Schmidt rank bound N = min(n_a, n_b)
    Index size() const { return static_cast<Index>(p_.size()); }
    const std::vector<double> &weights() const { return p_; }
    double weight(Index i) const { return p_[static_cast<std::size_t>(i)]; }
    double p_min() const { return p_.back(); }
    bool rank_deficient() const { return rank_deficient_; }

    // Coefficient vector in the product basis, index i*n_b + j.
    ComplexVector to_vector() const;
    ComplexMatrix reduced_density() const;

private:
    SchmidtState() = default;
    Index n_a_ = 0;
    Index n_b_ = 0;
    std::vector<double> p_;
    bool rank_deficient_ = false;
};

struct EntanglementMeasures {
    double renyi2 = 0.0;    // nats
    double scaled_e2 = 1.0; // 1 at maximal entanglement
    double delta_e2 = 0.0;  // sum p^2 - 1/N
    double p_min = 0.0;
};

struct SchmidtDecomposition {
    SchmidtState state;
    // psi = sum_i sqrt(p_i) basis_a.col(i) (x) basis_b.col(i)
    ComplexMatrix basis_a;
    ComplexMatrix basis_b;
};

SchmidtDecomposition schmidt_from_vector(const ComplexVector &psi, Index n_a, Index n_b);

EntanglementMeasures measures(const SchmidtState &s);

// diag(sqrt(p_1), ..., sqrt(p_N))
ComplexMatrix psi_operator(const SchmidtState &s);

double delta_e2_of(const std::vector<double> &p);

// p_i proportional to exp(-beta lambda_i) with centered standard normal
// lambda, beta chosen by bisection to hit the target.
SchmidtState sample_schmidt_fixed_e2(Index n, double target_delta_e2, Rng &rng);

ComplexMatrix partial_trace_b(const ComplexMatrix &rho, Index n_a, Index n_b);
ComplexMatrix partial_trace_a(const ComplexMatrix &rho, Index n_a, Index n_b);

} // namespace forge
