#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "momentflow/grid.hpp"
#include "momentflow/hminus.hpp"
#include "momentflow/operator.hpp"

namespace momentflow {

struct FlowConfig {
    double p = 2.0;
    int n = 2;
    ConstraintSpace y = ConstraintSpace::zero_zero();
    std::size_t n_points = 513;
    double dt = 1e-3;
    double t_final = 5.0;
    double prox_tol = 1e-10;
    // Smoothing of |f|^(p-2) f near 0, used only for p < 2.
    double eps_reg = 1e-8;
    int max_newton = 60;

    // Throws std::invalid_argument naming the field.
    void validate() const;
};

struct FlowRecord {
    double t = 0.0;
    double mu0 = 0.0;
    double mu1 = 0.0;
    double mun = 0.0;
    double lp_energy = 0.0;
    double hy_norm_sq = 0.0;
    double dissipation_residual = 0.0;
};

class ProxFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// (1/p) int |f|^p by the trapezoid rule.
double energy(const GridFunction& f, double p);
// |f|^(p-2) f, with |f| -> sqrt(f^2 + eps^2) when p < 2.
GridFunction energy_gradient_l2(const GridFunction& f, double p, double eps_reg = 0.0);

struct ProxResult {
    GridFunction u;
    int iterations = 0;
    double kkt_residual = 0.0;
    int substeps = 1;
    // Converged at the rounding floor of an ill-conditioned Hessian rather than at prox_tol.
    bool at_floor = false;
};

/**
 * Implicit Euler step for the H_Y gradient flow of the L^p energy:
 *   argmin_f  dt E(f) + 1/2 |f - u_prev|_G^2   subject to  C f = 0,
 * by damped Newton on the KKT system. For p < 2 the iteration runs in s = psi(f).
 * The KKT residual is measured in the H_Y norm relative to max(|f - u_prev|_G, |f|_G).
 * When Newton stalls at the rounding floor (best residual flat for 5 iterations and
 * within 1e3 * prox_tol) the best iterate is returned and flagged at_floor.
 */
class ProxSolver {
public:
    ProxSolver(const OperatorAssembly& asm_, const FlowConfig& cfg);

    // One step of size cfg.dt. On Newton failure retries once with two half steps and eps_reg * 0.1.
    ProxResult step(const GridFunction& u_prev);
    // Single attempt with explicit dt and eps; throws ProxFailure.
    ProxResult solve(const GridFunction& u_prev, double dt, double eps) const;

    double eps_reg() const { return eps_; }
    int retries() const { return retries_; }

private:
    ProxResult solve_primal(const GridFunction& u_prev, double dt, double eps) const;
    ProxResult solve_dual(const GridFunction& u_prev, double dt, double eps) const;

    const OperatorAssembly* asm_;
    FlowConfig cfg_;
    // K = Z (Z^T G Z)^{-1} Z^T, the inverse metric on ker C, and W K W for the p < 2 path.
    Eigen::MatrixXd inverse_;
    Eigen::MatrixXd weighted_inverse_;
    double eps_;
    int retries_ = 0;
};

ProxResult prox_step(const GridFunction& u_prev, const FlowConfig& cfg);

GridFunction project_initial(const GridFunction& f, int n, const ConstraintSpace& y);
Polynomial project_initial(const Polynomial& f, int n, const ConstraintSpace& y);

struct FlowRun {
    std::vector<FlowRecord> records;
    GridFunction final_state{3, 0.0};
    long newton_iterations = 0;
    long floor_limited_steps = 0;
    int retries = 0;
    double final_eps_reg = 0.0;
};

using StepObserver = std::function<void(std::size_t step, double t, const GridFunction& u)>;

FlowRecord make_record(const OperatorAssembly& asm_, const GridFunction& u, double t, double p);

// Records at every step; the t = 0 record has zero dissipation residual.
FlowRun run_flow(const GridFunction& u0, const FlowConfig& cfg, const StepObserver& observer = {});
FlowRun run_flow(const OperatorAssembly& asm_, const GridFunction& u0, const FlowConfig& cfg,
                 const StepObserver& observer = {});

enum class DecayModel { Polynomial, Exponential };

struct DecayFit {
    // log v = intercept + slope * (log t or t)
    double slope = 0.0;
    double intercept = 0.0;
    double rate = 0.0;
    double r_squared = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
    std::size_t count = 0;
};

// Least squares on hy_norm_sq over [t_end/2, t_end]; t_end is cut back to the last record above 1e-28.
DecayFit fit_decay(const std::vector<FlowRecord>& records, DecayModel model);

struct InequalityCheck {
    double max_violation = 0.0;
    double c_empirical = 0.0;
    std::size_t points = 0;
};

// v' <= -C v^(p/2) on central differences of v = hy_norm_sq.
InequalityCheck differential_inequality_check(const std::vector<FlowRecord>& records, double p);

// min |u|_p^p / |u|_G^p over the span of the lowest eigenvectors.
double embedding_constant(const OperatorAssembly& asm_, double p, std::size_t modes = 12);
double embedding_constant(const Eigenbasis& basis, const Eigen::VectorXd& weights, double p, std::size_t modes = 12);

struct PotentialCheck {
    double gamma_reconstructed = 0.0;
    double gamma_formula = 0.0;
    double relative_gap = 0.0;
};

// Reads gamma off (u - u_prev)/dt - (psi(u))'' ~ -gamma (1-x)^(n-2) and compares with gamma(psi(u)).
PotentialCheck potential_diagnostic(const GridFunction& u_prev, const GridFunction& u, double dt, double p, int n,
                                    double eps_reg = 0.0);

}  // namespace momentflow
