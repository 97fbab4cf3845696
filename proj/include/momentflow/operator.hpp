#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "momentflow/grid.hpp"
#include "momentflow/hminus.hpp"
#include "momentflow/polynomial.hpp"

namespace momentflow {

// gamma(f) = (n-1)(2n-1) f(0) - (n-1)^2 (2n-1) mu_{n-2}(f), zero for n = 1.
double gamma(const GridFunction& f, int n);
Rational gamma(const Polynomial& f, int n);

struct AtomCoefficient {
    double c = 0.0;
    // For Y = R^2 the orthogonality also demands f(0) = f(1).
    bool consistent = true;
};

// c(u) from (c + f(1), f(0) - f(1)) orthogonal to Y. Only Line and Full carry an atom term.
AtomCoefficient c_of(double f0, double f1, const ConstraintSpace& y, double tol = 1e-10);

/**
 * Discrete forms on the N-point grid:
 *   metric  G = T^T Q T + m0 m0^T   (T: nodal values -> samples of P_n f, Q: P2 mass)
 *   mass    M = diag(trapezoid weights)
 *   rows    C = quadrature functionals cutting out V_Y
 * The discrete operator A is defined by G(Af, h) = M(f, h) for h in ker C.
 */
struct OperatorAssembly {
    int n = 1;
    ConstraintSpace y = ConstraintSpace::zero_zero();
    std::size_t n_points = 0;
    Eigen::MatrixXd metric;
    Eigen::VectorXd mass;
    Eigen::MatrixXd constraints;
    // G-row of Id_m^{-1}((1-x)^{n-2}) and the row vector of gamma; used by the eta term.
    Eigen::VectorXd potential_row;
    Eigen::VectorXd gamma_row;

    std::size_t size() const { return n_points; }
    double metric_inner(const GridFunction& u, const GridFunction& v) const;
    double mass_inner(const GridFunction& u, const GridFunction& v) const;
    Eigen::VectorXd constraint_values(const GridFunction& u) const;
};

OperatorAssembly assemble(int n, const ConstraintSpace& y, std::size_t n_points);

// Subtract a*1 + b*(1-x)^n so that the grid moments land in Y.
GridFunction project_admissible(const GridFunction& f, int n, const ConstraintSpace& y);
Polynomial project_admissible(const Polynomial& f, int n, const ConstraintSpace& y);

// Id_m^{-1}(-u'' + gamma(u)(1-x)^{n-2}), minus c(u) delta_1 for Line and Full.
GridDual apply_strong(const GridFunction& u, int n, const ConstraintSpace& y, double tol = 1e-8);

struct IbpSides {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
};

// (Id_m^{-1} u'' | h)_n against the boundary-moment formula.
IbpSides ibp_check(const Polynomial& u, const Polynomial& h, int n);
IbpSides ibp_check(const GridFunction& u, const GridFunction& h, int n);
// Exact sides as rationals.
std::pair<Rational, Rational> ibp_sides_exact(const Polynomial& u, const Polynomial& h, int n);

// max over tests h of |G(apply_strong(u), h) - M(u, h)|; tests are made admissible first.
double weak_residual(const OperatorAssembly& asm_, const GridFunction& u, const std::vector<GridFunction>& tests);

struct Eigenbasis {
    Eigen::VectorXd values;
    // Columns are G-orthonormal and satisfy the constraints.
    Eigen::MatrixXd vectors;
};

std::vector<double> spectrum(const OperatorAssembly& asm_, std::size_t k);
Eigenbasis eigenbasis(const OperatorAssembly& asm_);
double suggest_dt(const OperatorAssembly& asm_);

enum class Scheme { ImplicitEuler, Exponential };

/**
 * Stepper for u' = -Id_m^{-1}(-u'' + eta gamma(u)(1-x)^{n-2}) on H_Y.
 * eta = 1 is the semigroup generated by -A_Y, eta = 0 the plain heat equation.
 */
class LinearStepper {
public:
    LinearStepper(const OperatorAssembly& asm_, double dt, Scheme scheme = Scheme::ImplicitEuler, double eta = 1.0,
                  std::size_t modes = 0);

    GridFunction step(const GridFunction& u) const;
    double dt() const { return dt_; }

private:
    const OperatorAssembly* asm_;
    double dt_;
    Scheme scheme_;
    Eigen::PartialPivLU<Eigen::MatrixXd> kkt_;
    Eigen::MatrixXd modes_;
    Eigen::VectorXd decay_;
};

GridFunction semigroup_step(const OperatorAssembly& asm_, const GridFunction& u, double dt,
                            Scheme scheme = Scheme::ImplicitEuler, double eta = 1.0);

// Moment residuals of w = u'' - gamma(u)(1-x)^{n-2}, the conditions for u in D(A_Y^2).
std::pair<double, double> da2_diagnostic(const GridFunction& u, int n, const ConstraintSpace& y);

}  // namespace momentflow
