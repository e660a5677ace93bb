#pragma once

#include "forge/lindblad.hpp"
#include "forge/states.hpp"

#include <vector>

namespace forge {

// Two n-qubit chains A and B. Qubit order: A sites 1..n, then B sites 1..n,
// site 1 the most significant bit of its chain. sigma^- = |0><1|.
struct ChainSpec {
    int n = 1;
    double j = 1.0;
    double j_z = 0.0;
    double u = 1.0;
    double v = 0.0;

    static ChainSpec from_v(int n, double j, double j_z, double v);
    void validate() const;
};

inline constexpr int kMaxChainLength = 4;
inline constexpr double kMidgapFraction = 0.1;

// Intrachain XX hopping plus sgn(s) J_z ZZ with sgn(A) = +1, sgn(B) = -1, and
// the two boundary squeezing jumps.
Lindbladian xxz_lindbladian(const ChainSpec &spec);
// Leg hopping with J_z = 0 plus the XXZ rung coupling, same jumps.
Lindbladian ladder_lindbladian(const ChainSpec &spec);
ComplexMatrix ladder_rung_hamiltonian(const ChainSpec &spec);

ComplexVector rainbow_state(int n, double v);
SchmidtState rainbow_schmidt(int n, double v);
// v in (0, 1/sqrt(2)] giving the requested deficit.
double rainbow_v_for_delta_e2(int n, double target);

// Non-steady eigenvalues decaying slower than fraction * median rate.
std::vector<bool> midgap_mask(const SpectrumResult &r, double fraction = kMidgapFraction);
int count_midgap(const SpectrumResult &r, double fraction = kMidgapFraction);

} // namespace forge
