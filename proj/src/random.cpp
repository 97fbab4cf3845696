#include "momentflow/random.hpp"

#include <stdexcept>

namespace momentflow {

long Rng::uniform_int(long lo, long hi) {
    if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long>(next() % span);
}

double Rng::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

Polynomial random_polynomial(Rng& rng, int max_degree) {
    if (max_degree < 0) throw std::invalid_argument("random_polynomial: negative degree");
    const int degree = static_cast<int>(rng.uniform_int(0, max_degree));
    std::vector<Rational> coeffs(static_cast<std::size_t>(degree) + 1);
    for (int k = 0; k <= degree; ++k) {
        long num = rng.uniform_int(-20, 20);
        while (k == degree && num == 0) num = rng.uniform_int(-20, 20);
        Rational c(num, rng.uniform_int(1, 9));
        c.canonicalize();
        coeffs[k] = c;
    }
    return Polynomial(std::move(coeffs));
}

}  // namespace momentflow
