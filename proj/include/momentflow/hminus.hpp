#pragma once

#include <string>
#include <vector>

#include "momentflow/grid.hpp"
#include "momentflow/moments.hpp"
#include "momentflow/polynomial.hpp"
#include "momentflow/random.hpp"

namespace momentflow {

/**
 * Subspace Y of admissible (mu_0, mu_n) pairs:
 *   ZeroZero  Y = {0}^2
 *   ZeroFree  Y = {0} x R
 *   Line      Y = span{(1, slope)}
 *   Full      Y = R^2
 */
class ConstraintSpace {
public:
    enum class Kind { ZeroZero, ZeroFree, Line, Full };

    static ConstraintSpace zero_zero() { return ConstraintSpace(Kind::ZeroZero, 0.0); }
    static ConstraintSpace zero_free() { return ConstraintSpace(Kind::ZeroFree, 0.0); }
    static ConstraintSpace line(double slope);
    static ConstraintSpace full() { return ConstraintSpace(Kind::Full, 0.0); }

    // Accepts "zero_zero", "zero_free", "full", "line:<y>" (and CamelCase kind names).
    static ConstraintSpace parse(const std::string& text);

    Kind kind() const { return kind_; }
    double slope() const { return slope_; }

    // Y forces mu_0 = 0, so H_Y is the zero-mass subspace of H^{-1}(T).
    bool zero_mass() const { return kind_ == Kind::ZeroZero || kind_ == Kind::ZeroFree; }
    // Number of independent linear conditions on (mu_0, mu_n).
    int rank() const;
    // Distance of (mu0, mun) from Y in the max norm of the defining conditions.
    double violation(double mu0, double mun) const;

    std::string name() const;

    friend bool operator==(const ConstraintSpace&, const ConstraintSpace&) = default;

private:
    ConstraintSpace(Kind kind, double slope) : kind_(kind), slope_(slope) {}
    Kind kind_;
    double slope_;
};

template <class F>
struct carrier_scalar;
template <>
struct carrier_scalar<GridFunction> {
    using type = double;
};
template <>
struct carrier_scalar<Polynomial> {
    using type = Rational;
};

// Element of H^{-1}(T): a density plus an atom at x = 1 (coefficient of delta_1).
template <class F>
struct DualElement {
    F regular;
    typename carrier_scalar<F>::type atom{};
};

using GridDual = DualElement<GridFunction>;
using PolyDual = DualElement<Polynomial>;

double mu0(const GridDual& u);
Rational mu0(const PolyDual& u);

// P_n annihilates delta_1, so only the density contributes.
GridFunction apply_Pn(const GridDual& u, int n);
Polynomial apply_Pn(const PolyDual& u, int n);

// Id_m^{-1} g = g - mu_0(g) delta_1, the zero-mass representative.
GridDual id_m_inverse(const GridFunction& g);
PolyDual id_m_inverse(const Polynomial& g);

// (u|v)_n = int P_n u P_n v + mu_0(u) mu_0(v).
double inner_hy(const GridDual& u, const GridDual& v, int n);
Rational inner_hy(const PolyDual& u, const PolyDual& v, int n);

struct NormRatioBounds {
    int n = 1;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    int samples = 0;
};

// Ratios ||u||_n / ||u||_1 over random polynomial densities (exact path).
std::vector<NormRatioBounds> norm_equivalence_report(int samples, const std::vector<int>& n_list, Rng& rng,
                                                     int max_degree = 6);

// Empirical max of |mu_n(g)|^2 / (||g||_{L2} ||g||_{H,n}) over random polynomials g.
// n_points == 0 selects the exact path, otherwise g is sampled on that grid.
double interpolation_constant_probe(int n, int samples, Rng& rng, std::size_t n_points = 0, int max_degree = 6);

// Single-function version of the probe ratio, exact or on a grid.
double interpolation_ratio(const Polynomial& g, int n);
double interpolation_ratio(const GridFunction& g, int n);

}  // namespace momentflow
