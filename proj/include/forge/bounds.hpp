#pragma once

#include "forge/engineer.hpp"
#include "forge/lindblad.hpp"
#include "forge/states.hpp"

#include <optional>
#include <vector>

namespace forge {

// |A_mu| and |B_mu|: largest matrix-element magnitudes of sqrt(kappa) a, sqrt(kappa) b.
struct JumpMagnitudes {
    std::vector<double> a;
    std::vector<double> b;

    double sum_a_squared() const; // M * kappa_bar
};
JumpMagnitudes jump_magnitudes(const Lindbladian &l);

// M kappa_bar sqrt(2) (N-1) / p_min (1 - E2)
double gamma_max(const Lindbladian &l, const SchmidtState &state);
// sqrt(2 (N^3 - N^2)) [(sum |A|)^2 + (sum |B|)^2] sqrt(1 - E2)
double gamma_max_prime(const Lindbladian &l, const SchmidtState &state);
// equal-dimension term on the Schmidt block plus sum ||coupling block||_2^2
double gamma_uneven(const Lindbladian &l, const SchmidtState &state, const UnevenSpec &spec);

struct HaarRate {
    double double_sum = 0.0;  // (1/N^2) sum |A_jk|^2 (p_j - p_k)^2 / p_j
    double trace_form = 0.0;  // (1/N^2) tr(L^dag rho_ss)
    double value() const { return double_sum; }
};
HaarRate haar_rate_exact(const Lindbladian &l, const SchmidtState &state);

// 2 M kappa_bar (N-1)/N^2 / p_min (1 - E2)
double haar_bound(const Lindbladian &l, const SchmidtState &state);

struct EnsemblePrediction {
    double mean_gap = 0.0;
    double var_gap = 0.0;
    double mean_haar_rate = 0.0;
};
EnsemblePrediction ensemble_predictions(int n, int m, double sigma, double delta_e2);

double mixing_lower_bound(double gamma, double epsilon);

// tr(L^dag rho_ss), cross-checked against N^2 times the Haar rate.
double perturbative_gap(const Lindbladian &l, const SchmidtState &state);

struct BoundReport {
    double gamma_max = 0.0;
    double gamma_max_prime = 0.0;
    std::optional<double> gamma_uneven;
    double haar_bound = 0.0;
    double haar_rate_exact = 0.0;
    double mixing_lower = 0.0;
    double symmetry_error = 0.0;
    double ensemble_mean_gap = 0.0;
    double ensemble_var_gap = 0.0;
};
BoundReport evaluate_bounds(const Lindbladian &l, const SchmidtState &state, double epsilon, double sigma = 1.0,
                            const std::optional<UnevenSpec> &uneven = std::nullopt);

struct RateAudit {
    double rate = 0.0;
    double gamma_max = 0.0;       // NaN for rank-deficient states
    double gamma_max_prime = 0.0;
    bool violates_max = false;
    bool violates_prime = false;
};
// |dF/dt| at rho against both bounds.
RateAudit audit_rate(const Lindbladian &l, const SchmidtState &state, const ComplexMatrix &rho);

} // namespace forge
