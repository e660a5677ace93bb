#include "forge/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <cmath>

namespace forge {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t sub_seed(std::uint64_t master, std::uint64_t target_index, std::uint64_t realization_index) {
    return mix64(mix64(mix64(master) ^ target_index) ^ realization_index);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::normal() {
    boost::random::normal_distribution<double> dist(0.0, 1.0);
    return dist(engine_);
}

double Rng::uniform() {
    boost::random::uniform_01<double> dist;
    return dist(engine_);
}

cplx Rng::complex_normal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
}

std::uint64_t Rng::next_u64() { return engine_(); }

ComplexMatrix Rng::ginibre(Index rows, Index cols, double sigma) {
    ComplexMatrix g(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i)
            g(i, j) = complex_normal(sigma * sigma);
    return g;
}

ComplexVector Rng::haar_state(Index dim) {
    ComplexVector v(dim);
    for (Index i = 0; i < dim; ++i)
        v(i) = complex_normal();
    return v.normalized();
}

ComplexMatrix Rng::random_density(Index dim, Index rank) {
    ComplexMatrix g = ginibre(dim, rank, 1.0);
    ComplexMatrix rho = g * g.adjoint();
    return rho / rho.trace().real();
}

} // namespace forge
