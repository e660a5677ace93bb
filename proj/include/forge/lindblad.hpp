#pragma once

#include "forge/linalg.hpp"
#include "forge/rng.hpp"
#include "forge/types.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace forge {

inline constexpr double kSteadyTol = 1e-8;
inline constexpr Index kMaxHilbertDim = 64;

// L = sqrt(kappa) (a (x) 1 + 1 (x) b)
struct JumpOperator {
    ComplexMatrix a;
    ComplexMatrix b;
    double kappa = 1.0;

    ComplexMatrix full() const;
};

struct Lindbladian {
    Index n_a = 1;
    Index n_b = 1;
    ComplexMatrix hamiltonian;
    std::vector<JumpOperator> jumps;

    Index dim() const { return n_a * n_b; }
    // Throws PreconditionError on shape or Hermiticity problems.
    void validate() const;
    std::vector<ComplexMatrix> full_jumps() const;
    // mean over jumps of the squared largest matrix element of sqrt(kappa) a
    double mean_kappa() const;
};

// A Hamiltonian-free Lindbladian with no jumps, ready to be filled in.
Lindbladian empty_lindbladian(Index n_a, Index n_b);

struct SpectrumResult {
    std::vector<cplx> eigenvalues; // descending real part
    std::vector<double> residuals;
    int steady_count = 0;
    double gap = 0.0;
    double residual_max = 0.0;
    double tolerance = 0.0;        // absolute steady-block cutoff that was applied
    bool partial = false;          // only the slow end of the spectrum was computed
    bool flagged = false;          // some pair missed the residual or conditioning contract
};

ComplexMatrix build_superoperator(const Lindbladian &l);

// Direct evaluation of -i[H, rho] + sum D[L] rho.
ComplexMatrix apply_lindbladian(const Lindbladian &l, const ComplexMatrix &rho);
// Heisenberg picture: i[H, X] + sum (L^+ X L - 1/2 {L^+ L, X}).
ComplexMatrix apply_adjoint(const Lindbladian &l, const ComplexMatrix &x);

// Steady block and gap from a sorted eigenvalue list; shared by both solvers.
void classify_spectrum(SpectrumResult &r, double abs_tol, int known_steady = 0);

SpectrumResult spectrum(const Lindbladian &l, double tol = kSteadyTol);
SpectrumResult spectrum_of(const ComplexMatrix &superop, double kappa_bar, double tol = kSteadyTol);

// Slow end of the spectrum only, for a Lindbladian known to have psi as a
// steady state. The zero mode from trace preservation is deflated and the
// count rightmost remaining eigenvalues are found matrix-free.
SpectrumResult slow_spectrum(const Lindbladian &l, const ComplexVector &psi, int count = 8,
                             double tol = kSteadyTol);

std::vector<ComplexMatrix> steady_states(const Lindbladian &l, double tol = linalg::kDefaultKernelTol);

ComplexMatrix evolve(const Lindbladian &l, const ComplexMatrix &rho0, double t);
ComplexMatrix evolve_with(const ComplexMatrix &superop, const ComplexMatrix &rho0, double t);

// Checks Hermitian, unit trace, PSD within tol.
void require_density(const ComplexMatrix &rho, double tol, const char *what);

double fidelity_to_pure(const ComplexMatrix &rho, const ComplexVector &psi);
double fidelity_rate(const Lindbladian &l, const ComplexMatrix &rho, const ComplexVector &psi);

// Steadiness residual ||L(|psi><psi|)||_F.
double steady_residual(const Lindbladian &l, const ComplexVector &psi);

struct AbsorbingReport {
    std::vector<double> norms;       // ||L^+ psi||^2
    std::vector<double> commutators; // <psi|[L, L^+]|psi>
    std::vector<double> dark_residuals; // ||L psi||
    bool non_dark = false;           // some jump fails the dark identity
};
AbsorbingReport absorbing_norms(const Lindbladian &l, const ComplexVector &psi);

struct SymmetryReport {
    double hamiltonian_commutator = 0.0;      // ||[P, H]||_HS
    std::vector<double> jump_commutators;     // ||[P, L]||_HS
    double symmetry_error = 0.0;              // sum <psi|[L, L^+]|psi>
};
SymmetryReport strong_symmetry_check(const Lindbladian &l, const ComplexVector &psi);

// Single jump F - iM with Hamiltonian {F, M}/2, on an unsplit space
// (n_a = D, n_b = 1).
Lindbladian build_mff(const ComplexMatrix &m_op, const ComplexMatrix &f_op);
// Same, but the jump must split as A (x) 1 + 1 (x) B across n_a x n_b.
Lindbladian build_mff(const ComplexMatrix &m_op, const ComplexMatrix &f_op, Index n_a, Index n_b);

// Write x as a (x) 1 + 1 (x) b when possible.
std::optional<JumpOperator> split_local(const ComplexMatrix &x, Index n_a, Index n_b, double tol = 1e-10);

double trace_distance(const ComplexMatrix &rho, const ComplexMatrix &sigma);

// Computational basis states plus k Haar-random pure states.
std::vector<ComplexMatrix> default_probes(Index dim, int k, Rng &rng);

inline constexpr double kNotReached = std::numeric_limits<double>::infinity();

double mixing_time_estimate(const Lindbladian &l, double epsilon, const std::vector<ComplexMatrix> &probes,
                            double t_max, double dt);

} // namespace forge
