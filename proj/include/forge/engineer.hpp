#pragma once

#include "forge/lindblad.hpp"
#include "forge/rng.hpp"
#include "forge/states.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace forge {

enum class Ensemble { Ginibre, Hermitian, Symmetric, DetailedBalance };

struct EnsembleKind {
    Ensemble tag = Ensemble::Ginibre;
    double sigma = 1.0;

    void validate() const;
};

std::string_view ensemble_name(Ensemble e);
// Throws PreconditionError on unknown names.
Ensemble parse_ensemble(std::string_view name);

struct UnevenSpec {
    Index n_a = 1;
    Index n_b = 2;
    double sigma_b = 0.0;

    void validate() const;
};

inline constexpr double kPartnerPminFloor = 1e-12;
inline constexpr double kPartnerWarnPmin = 1e-6;

// B = -Psi a^T Psi^{-1}, so that (a (x) 1 + 1 (x) B)|psi> = 0.
ComplexMatrix partner_operator(const ComplexMatrix &a, const SchmidtState &state);

// (a_s + Psi a_s^T Psi^{-1}) / sqrt(2)
ComplexMatrix detailed_balance_symmetrize(const ComplexMatrix &a_s, const SchmidtState &state);

// The A half of a random jump, drawn from the ensemble.
ComplexMatrix random_a(const EnsembleKind &kind, const SchmidtState &state, Rng &rng);
JumpOperator random_jump(const EnsembleKind &kind, const SchmidtState &state, Rng &rng);

// M random engineered jumps, no Hamiltonian.
Lindbladian engineered_lindbladian(const SchmidtState &state, int m, const EnsembleKind &kind, Rng &rng);

int kernel_dimension(const JumpOperator &j, double tol = linalg::kDefaultKernelTol);
// Dimension of the common kernel of all jumps.
int joint_kernel_dimension(const std::vector<JumpOperator> &jumps, double tol = linalg::kDefaultKernelTol);

// Partner on the larger B space. Levels >= n_a of B are the extra ones:
// the block mapping extra levels into the Schmidt levels is random with
// scale sigma_b, the other blocks touching extra levels are zero.
ComplexMatrix uneven_partner(const ComplexMatrix &a, const UnevenSpec &spec, const SchmidtState &state, Rng &rng);

// Engineered Lindbladian on n_a x n_b with uneven partners. state must have
// dimensions (spec.n_a, spec.n_b).
Lindbladian uneven_lindbladian(const SchmidtState &state, int m, const EnsembleKind &kind, const UnevenSpec &spec,
                               Rng &rng);

// Superoperator projector X -> Q X Q with Q = 1_A (x) (projector onto the
// first n_a levels of B); D^2 x D^2.
ComplexMatrix a_compatible_projector(Index n_a, Index n_b);

// P L P restricted to its range, an n_a^4 x n_a^4 matrix.
ComplexMatrix reduced_superoperator(const Lindbladian &l, Index n_a);

struct CqaResult {
    ComplexMatrix h_a;
    ComplexMatrix h_b;
    ComplexMatrix h_ab;
    Lindbladian full;
    Lindbladian system_a; // -i[H_A, .] + D[A] on A alone (n_b = 1)
};

// Directional absorber for a detailed-balance jump a and distinct weights.
CqaResult cqa_construct(const ComplexMatrix &a, const SchmidtState &state);
// Several jumps at once.
CqaResult cqa_construct(const std::vector<ComplexMatrix> &as, const SchmidtState &state);

} // namespace forge
