#include "momentflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace momentflow {

namespace {

void check_same_size(const GridFunction& a, const GridFunction& b) {
    if (a.size() != b.size()) throw std::invalid_argument("GridFunction: size mismatch");
}

}  // namespace

GridFunction::GridFunction(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 3) throw std::invalid_argument("GridFunction: need at least 3 points");
    for (double v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("GridFunction: non-finite value");
    }
}

GridFunction::GridFunction(std::size_t n_points, double fill) : GridFunction(std::vector<double>(n_points, fill)) {}

GridFunction GridFunction::sample(std::size_t n_points, const std::function<double(double)>& f) {
    if (n_points < 3) throw std::invalid_argument("GridFunction: need at least 3 points");
    std::vector<double> v(n_points);
    const double last = static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) v[i] = f(static_cast<double>(i) / last);
    return GridFunction(std::move(v));
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
    check_same_size(*this, other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
    check_same_size(*this, other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

GridFunction& GridFunction::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

std::vector<double> trapezoid_weights(std::size_t n_points) {
    if (n_points < 2) throw std::invalid_argument("trapezoid_weights: need at least 2 points");
    const double h = 1.0 / static_cast<double>(n_points - 1);
    std::vector<double> w(n_points, h);
    w.front() = w.back() = 0.5 * h;
    return w;
}

double quadrature(const GridFunction& f) {
    const auto v = f.values();
    double interior = 0.0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) interior += v[i];
    return f.spacing() * (interior + 0.5 * (v.front() + v.back()));
}

GridFunction second_derivative(const GridFunction& f) {
    const std::size_t n = f.size();
    if (n < 5) throw std::invalid_argument("second_derivative: need at least 5 points");
    const double inv_h2 = 1.0 / (f.spacing() * f.spacing());
    std::vector<double> d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) * inv_h2;
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv_h2;
    d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * inv_h2;
    return GridFunction(std::move(d));
}

GridFunction poly_to_grid(const Polynomial& p, std::size_t n_points) {
    if (n_points < 3) throw std::invalid_argument("poly_to_grid: need at least 3 points");
    std::vector<double> v(n_points);
    const long denom = static_cast<long>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) {
        Rational x(static_cast<long>(i), denom);
        x.canonicalize();
        v[i] = to_double(p(x));
    }
    return GridFunction(std::move(v));
}

}  // namespace momentflow
