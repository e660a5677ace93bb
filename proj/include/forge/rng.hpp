#pragma once

#include "forge/types.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <cstdint>

namespace forge {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x);

// Seed for realization r of target t under a master seed. Fixed across
// platforms and independent of scheduling.
std::uint64_t sub_seed(std::uint64_t master, std::uint64_t target_index, std::uint64_t realization_index);

// Boost distributions are used instead of <random> ones because the
// standard library leaves their algorithms implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    double normal();
    double uniform();
    // Complex Gaussian with E|z|^2 = variance, split evenly over real and imaginary parts.
    cplx complex_normal(double variance = 1.0);
    std::uint64_t next_u64();

    ComplexMatrix ginibre(Index rows, Index cols, double sigma);
    ComplexVector haar_state(Index dim);
    // Random density matrix with the given rank from a Ginibre factor.
    ComplexMatrix random_density(Index dim, Index rank);

private:
    boost::random::mt19937_64 engine_;
};

} // namespace forge
