#pragma once

#include <cstddef>
#include <vector>

#include "momentflow/grid.hpp"
#include "momentflow/polynomial.hpp"

namespace momentflow {

// mu_n(f) = int_0^1 (1-x)^n f(x) dx. Trapezoid on the grid path, exact on polynomials.
double moment(const GridFunction& f, int n);
Rational moment(const Polynomial& f, int n);

// Row vector of the trapezoid functional mu_n on N points.
std::vector<double> moment_weights(std::size_t n_points, int n);

// (I f)(x) = int_0^x f. Cumulative trapezoid on the grid path.
GridFunction primitive(const GridFunction& f);
Polynomial primitive(const Polynomial& f);

// P_n f = I f - mu_n(f).
GridFunction apply_Pn(const GridFunction& f, int n);
Polynomial apply_Pn(const Polynomial& f, int n);

// J_n phi(x) = int_x^1 phi - mu_0(phi) (1-x)^n.
GridFunction apply_Jn(const GridFunction& phi, int n);
Polynomial apply_Jn(const Polynomial& phi, int n);

/**
 * Values of P_n f on the refined grid (nodes and cell midpoints, 2N-1
 * entries, interleaved) where I f is the exact primitive of the
 * piecewise-linear interpolant of f. On each cell P_n f is then a
 * quadratic, and these samples determine it.
 */
std::vector<double> pn_quadratic_samples(const GridFunction& f, int n);

// Exact integral of the product of two piecewise quadratics given by
// their (2N-1)-point samples from pn_quadratic_samples.
double quadratic_samples_inner(const std::vector<double>& a, const std::vector<double>& b);

// int_0^1 P_n f * P_n g, computed exactly for the piecewise-linear interpolants.
double pn_inner(const GridFunction& f, const GridFunction& g, int n);

enum class ProjectionNorm { L2, Lq };

template <class F, class S>
struct SpanProjection {
    F projection;
    F remainder;
    // projection = constant + slope * (1-x)^n
    S constant;
    S slope;
};

using GridSpanProjection = SpanProjection<GridFunction, double>;
using PolySpanProjection = SpanProjection<Polynomial, Rational>;

// Projection onto span{1, (1-x)^n}. L2 mode uses the trapezoid inner product;
// Lq mode minimizes the trapezoid L^q distance, q in (1, inf).
GridSpanProjection project_span(const GridFunction& f, int n, ProjectionNorm norm = ProjectionNorm::L2,
                                double q = 2.0);
PolySpanProjection project_span(const Polynomial& f, int n);

// Q_k(x) = P_k(2x - 1), built with the shifted three-term recurrence.
Polynomial legendre_Q(int k);

struct MomentVector {
    std::vector<int> indices;
    std::vector<double> entries;

    MomentVector(std::vector<int> indices, std::vector<double> entries);
    // Entries for indices 0..entries.size()-1.
    static MomentVector leading(std::vector<double> entries);
};

// Polynomial of degree <= m with mu_0..mu_m equal to the targets. Requires
// indices 0..m in order. Monomial Gram solve for m <= 8, Legendre basis beyond.
Polynomial construct_with_moments(const MomentVector& targets);

namespace detail {
Polynomial construct_with_moments_monomial(const std::vector<Rational>& targets);
Polynomial construct_with_moments_legendre(const std::vector<Rational>& targets);
}  // namespace detail

}  // namespace momentflow
