#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "momentflow/polynomial.hpp"

namespace momentflow {

/**
 * Real function sampled on the uniform grid x_i = i/(N-1), i = 0..N-1,
 * endpoints included. Construction enforces N >= 3 and finite values.
 */
class GridFunction {
public:
    explicit GridFunction(std::vector<double> values);
    GridFunction(std::size_t n_points, double fill);

    static GridFunction sample(std::size_t n_points, const std::function<double(double)>& f);

    std::size_t size() const { return values_.size(); }
    double spacing() const { return 1.0 / static_cast<double>(values_.size() - 1); }
    double node(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(values_.size() - 1); }

    double operator[](std::size_t i) const { return values_[i]; }
    double front() const { return values_.front(); }
    double back() const { return values_.back(); }

    std::span<const double> values() const { return values_; }
    const std::vector<double>& data() const { return values_; }

    GridFunction& operator+=(const GridFunction& other);
    GridFunction& operator-=(const GridFunction& other);
    GridFunction& operator*=(double s);

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(GridFunction a, double s) { return a *= s; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

    double max_abs() const;

private:
    std::vector<double> values_;
};

// Composite trapezoid weights on N uniform points.
std::vector<double> trapezoid_weights(std::size_t n_points);

double quadrature(const GridFunction& f);

// Central differences inside, second-order one-sided stencils at both ends.
GridFunction second_derivative(const GridFunction& f);

GridFunction poly_to_grid(const Polynomial& p, std::size_t n_points);

}  // namespace momentflow
