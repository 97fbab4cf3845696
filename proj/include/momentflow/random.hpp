#pragma once

#include <cstdint>
#include <random>

#include "momentflow/polynomial.hpp"

namespace momentflow {

/**
 * Deterministic random source. The engine is std::mt19937_64, whose output
 * sequence is fixed by the C++ standard; the derived draws below use only
 * explicit integer arithmetic (no std::*_distribution, whose algorithms are
 * implementation-defined), so a seed reproduces the same data everywhere.
 *
 *   uniform_int(lo, hi) = lo + (next() mod (hi - lo + 1))
 *   uniform01()         = (next() >> 11) * 2^-53
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    long uniform_int(long lo, long hi);
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
    std::mt19937_64 engine_;
};

/**
 * Random polynomial of degree at most max_degree: the degree is uniform in
 * [0, max_degree], each coefficient is k/d with k uniform in [-20, 20] and d
 * uniform in [1, 9]. The leading coefficient is redrawn until nonzero.
 */
Polynomial random_polynomial(Rng& rng, int max_degree);

}  // namespace momentflow
