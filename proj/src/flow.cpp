#include "momentflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "momentflow/moments.hpp"
#include "momentflow/random.hpp"

namespace momentflow {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd to_eigen(const GridFunction& f) { return Eigen::Map<const VectorXd>(f.data().data(), f.size()); }

GridFunction from_eigen(const VectorXd& v) { return GridFunction(std::vector<double>(v.data(), v.data() + v.size())); }

double psi(double s, double p, double eps) {
    if (s == 0.0) return 0.0;
    if (p < 2.0 && eps > 0.0) return std::pow(s * s + eps * eps, 0.5 * (p - 2.0)) * s;
    return std::copysign(std::pow(std::abs(s), p - 1.0), s);
}

double psi_prime(double s, double p, double eps) {
    if (p == 2.0) return 1.0;
    if (p < 2.0) {
        const double r2 = s * s + eps * eps;
        if (r2 == 0.0) return std::numeric_limits<double>::infinity();
        return std::pow(r2, 0.5 * (p - 4.0)) * ((p - 1.0) * s * s + eps * eps);
    }
    return (p - 1.0) * std::pow(std::abs(s), p - 2.0);
}

double phi(double s, double p, double eps) {
    if (p < 2.0 && eps > 0.0) return std::pow(s * s + eps * eps, 0.5 * p) / p;
    return std::pow(std::abs(s), p) / p;
}

// Inverse of psi. For p < 2 the regularized psi is concave on f > 0, so Newton started
// below the root increases monotonically to it.
double psi_inverse(double s, double p, double eps) {
    if (s == 0.0) return 0.0;
    const double a = std::abs(s);
    double f = std::pow(a, 1.0 / (p - 1.0));
    if (p < 2.0 && eps > 0.0) {
        f = std::max(f, std::pow(eps, 2.0 - p) * a);
        for (int it = 0; it < 200; ++it) {
            const double next = f + (a - psi(f, p, eps)) / psi_prime(f, p, eps);
            if (!(next > f)) break;
            f = next;
        }
    }
    return std::copysign(f, s);
}

// Convex conjugate of phi (up to a constant), the primitive of psi_inverse.
double psi_conjugate(double s, double p, double eps) {
    const double f = psi_inverse(s, p, eps);
    return s * f - phi(f, p, eps);
}

// sqrt(v^T S v) for SPD S, rescaled first so tiny states do not underflow.
double quadratic_norm(const MatrixXd& s, const VectorXd& v) {
    const double m = v.lpNorm<Eigen::Infinity>();
    if (m == 0.0) return 0.0;
    const VectorXd z = v / m;
    return m * std::sqrt(std::max(z.dot(s * z), 0.0));
}

// States below this size are flushed to zero before products reach the subnormal range.
constexpr double kUnderflowFloor = 1e-280;

// Newton has hit the rounding floor when the best residual stalls for this many iterations.
constexpr int kStallIterations = 5;
// A stalled solve is accepted if its best residual is within this factor of prox_tol.
constexpr double kFloorFactor = 1e3;

struct StallTracker {
    double best = std::numeric_limits<double>::infinity();
    VectorXd best_state;
    int stalled = 0;

    void update(double residual, const VectorXd& state) {
        if (residual < best) {
            best = residual;
            best_state = state;
            stalled = 0;
        } else {
            ++stalled;
        }
    }
    bool accept(double tol) const { return stalled >= kStallIterations && best <= kFloorFactor * tol; }
};

MatrixXd null_space(const OperatorAssembly& a) {
    const auto size = static_cast<Eigen::Index>(a.n_points);
    const Eigen::Index r = a.constraints.rows();
    if (r == 0) return MatrixXd::Identity(size, size);
    Eigen::HouseholderQR<MatrixXd> qr(a.constraints.transpose());
    const MatrixXd q = qr.householderQ() * MatrixXd::Identity(size, size);
    return q.rightCols(size - r);
}

double objective(const VectorXd& x, const VectorXd& u_prev, const OperatorAssembly& a, double dt, double p,
                 double eps) {
    double e = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) e += a.mass(i) * phi(x(i), p, eps);
    const VectorXd d = x - u_prev;
    return dt * e + 0.5 * d.dot(a.metric * d);
}

void check_feasible_start(const OperatorAssembly& a, const GridFunction& u, const char* what) {
    const double v = a.y.violation(moment(u, 0), moment(u, a.n));
    if (v > 1e-8 * (1.0 + u.max_abs())) {
        std::ostringstream msg;
        msg << what << ": state violates the constraint space " << a.y.name() << " by " << v;
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace

void FlowConfig::validate() const {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p: must be a finite real > 1");
    if (n < 1) throw std::invalid_argument("n: must be a positive integer");
    if (n_points < 17) throw std::invalid_argument("n_points: must be at least 17");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt: must be positive");
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw std::invalid_argument("t_final: must be nonnegative");
    if (!(prox_tol > 0.0)) throw std::invalid_argument("prox_tol: must be positive");
    if (!(eps_reg >= 0.0) || !std::isfinite(eps_reg)) throw std::invalid_argument("eps_reg: must be nonnegative");
    if (max_newton < 1) throw std::invalid_argument("max_newton: must be >= 1");
}

double energy(const GridFunction& f, double p) {
    if (!(p > 1.0)) throw std::invalid_argument("energy: p must exceed 1");
    const auto w = trapezoid_weights(f.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += w[i] * std::pow(std::abs(f[i]), p);
    return acc / p;
}

GridFunction energy_gradient_l2(const GridFunction& f, double p, double eps_reg) {
    if (!(p > 1.0)) throw std::invalid_argument("energy_gradient_l2: p must exceed 1");
    std::vector<double> g(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) g[i] = psi(f[i], p, eps_reg);
    return GridFunction(std::move(g));
}

ProxSolver::ProxSolver(const OperatorAssembly& a, const FlowConfig& cfg) : asm_(&a), cfg_(cfg), eps_(cfg.eps_reg) {
    cfg_.validate();
    if (a.n_points != cfg.n_points || a.n != cfg.n || !(a.y == cfg.y)) {
        throw std::invalid_argument("ProxSolver: assembly does not match the flow configuration");
    }
    const MatrixXd z = null_space(a);
    const MatrixXd zgz = z.transpose() * a.metric * z;
    inverse_ = z * zgz.llt().solve(z.transpose());
    if (cfg_.p < 2.0) weighted_inverse_ = a.mass.asDiagonal() * inverse_ * a.mass.asDiagonal();
}

// Fast-diffusion steps are solved in s = psi(f). The map f = psi^{-1}(s) is smooth, while
// Newton in f oscillates across sign changes where psi has an infinite slope.
ProxResult ProxSolver::solve_dual(const GridFunction& u_prev, double dt, double eps) const {
    const OperatorAssembly& a = *asm_;
    const double p = cfg_.p;
    const VectorXd up = to_eigen(u_prev);
    const auto size = up.size();
    if (up.lpNorm<Eigen::Infinity>() < kUnderflowFloor) return {GridFunction(u_prev.size(), 0.0), 0, 0.0, 1};

    const VectorXd wu = a.mass.cwiseProduct(up);
    auto dual_value = [&](const VectorXd& s) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < size; ++i) acc += a.mass(i) * psi_conjugate(s(i), p, eps);
        return acc + 0.5 * dt * s.dot(weighted_inverse_ * s) - s.dot(wu);
    };

    VectorXd s(size), f(size), df(size);
    for (Eigen::Index i = 0; i < size; ++i) s(i) = psi(up(i), p, eps);
    double residual = std::numeric_limits<double>::infinity();
    StallTracker stall;
    for (int it = 0; it <= cfg_.max_newton; ++it) {
        for (Eigen::Index i = 0; i < size; ++i) {
            f(i) = psi_inverse(s(i), p, eps);
            df(i) = 1.0 / psi_prime(f(i), p, eps);
        }
        // Feasible primal candidate u - dt K W s, with K the inverse metric on ker C.
        const VectorXd shift = dt * (inverse_ * a.mass.cwiseProduct(s));
        const VectorXd candidate = up - shift;
        const VectorXd gap = f - candidate;
        const double scale = std::max(quadratic_norm(a.metric, shift), quadratic_norm(a.metric, candidate));
        const double miss = quadratic_norm(a.metric, gap);
        residual = (scale > 0.0) ? miss / scale : std::numeric_limits<double>::infinity();
        // K maps into ker C only up to rounding; remove the drift so it cannot accumulate.
        if (residual <= cfg_.prox_tol) return {project_admissible(from_eigen(candidate), a.n, a.y), it, residual, 1};
        stall.update(residual, candidate);
        if (stall.accept(cfg_.prox_tol)) {
            return {project_admissible(from_eigen(stall.best_state), a.n, a.y), it, stall.best, 1, true};
        }
        if (it == cfg_.max_newton) break;

        const VectorXd g = a.mass.cwiseProduct(gap);
        MatrixXd h = dt * weighted_inverse_;
        h.diagonal() += a.mass.cwiseProduct(df);
        Eigen::LLT<MatrixXd> llt(h);
        if (llt.info() != Eigen::Success) throw ProxFailure("prox: dual Hessian factorization failed");
        const VectorXd d = llt.solve(-g);

        const double f0 = dual_value(s);
        const double decrement = -g.dot(d);
        const double slack = 1e-15 * std::abs(f0);
        // Inside the rounding floor of the objective, take the plain Newton step.
        if (decrement <= 1e-10 * std::abs(f0)) {
            s += d;
            continue;
        }
        double step = 1.0;
        VectorXd trial = s + d;
        while (dual_value(trial) > f0 - 1e-4 * step * std::max(decrement, 0.0) + slack) {
            step *= 0.5;
            if (step < 1e-12) break;
            trial = s + step * d;
        }
        if (step < 1e-12) break;
        s = trial;
    }
    std::ostringstream msg;
    msg << "prox: dual Newton did not converge (relative residual " << residual << ", dt " << dt << ", eps_reg " << eps
        << ")";
    throw ProxFailure(msg.str());
}

ProxResult ProxSolver::solve(const GridFunction& u_prev, double dt, double eps) const {
    if (u_prev.size() != asm_->n_points) throw std::invalid_argument("prox: grid size mismatch");
    if (cfg_.p < 2.0) return solve_dual(u_prev, dt, eps);
    return solve_primal(u_prev, dt, eps);
}

ProxResult ProxSolver::solve_primal(const GridFunction& u_prev, double dt, double eps) const {
    const OperatorAssembly& a = *asm_;
    const double p = cfg_.p;
    const VectorXd up = to_eigen(u_prev);
    const MatrixXd& c = a.constraints;
    const Eigen::Index r = c.rows();
    const auto size = up.size();

    if (up.lpNorm<Eigen::Infinity>() < kUnderflowFloor) return {GridFunction(u_prev.size(), 0.0), 0, 0.0, 1};
    VectorXd x = up;
    VectorXd psi_w(size), curv(size);
    double residual = std::numeric_limits<double>::infinity();
    StallTracker stall;
    for (int it = 0; it <= cfg_.max_newton; ++it) {
        for (Eigen::Index i = 0; i < size; ++i) {
            psi_w(i) = a.mass(i) * psi(x(i), p, eps);
            curv(i) = a.mass(i) * psi_prime(x(i), p, eps);
        }
        const VectorXd delta = x - up;
        const VectorXd g_metric = a.metric * delta;
        const VectorXd g = dt * psi_w + g_metric;
        // K annihilates the multiplier directions, so g^T K g is the reduced gradient in the dual H_Y norm.
        const double scale = std::max(quadratic_norm(a.metric, delta), quadratic_norm(a.metric, x));
        const double reduced = quadratic_norm(inverse_, g);
        if (scale == 0.0 && reduced == 0.0) return {from_eigen(x), it, 0.0, 1};
        residual = (scale > 0.0) ? reduced / scale : std::numeric_limits<double>::infinity();
        const double infeasible = (r > 0) ? (c * x).lpNorm<Eigen::Infinity>() : 0.0;
        const bool feasible = infeasible <= 1e-13 * (1.0 + x.lpNorm<Eigen::Infinity>());
        if (residual <= cfg_.prox_tol && feasible) return {from_eigen(x), it, residual, 1};
        if (feasible) stall.update(residual, x);
        if (stall.accept(cfg_.prox_tol)) return {from_eigen(stall.best_state), it, stall.best, 1, true};
        if (it == cfg_.max_newton) break;
        if (!curv.allFinite()) throw ProxFailure("prox: Hessian is not finite (eps_reg too small?)");

        MatrixXd h = a.metric;
        h.diagonal() += dt * curv;
        Eigen::LLT<MatrixXd> llt(h);
        if (llt.info() != Eigen::Success) throw ProxFailure("prox: Hessian factorization failed");
        VectorXd d = llt.solve(-g);
        if (r > 0) {
            const MatrixXd hc = llt.solve(c.transpose());
            const MatrixXd schur = c * hc;
            const VectorXd nu = schur.ldlt().solve(c * d + c * x);
            d -= hc * nu;
        }

        const double f0 = objective(x, up, a, dt, p, eps);
        const double decrement = -g.dot(d);
        const double slack = 1e-15 * std::abs(f0);
        // Inside the rounding floor of the objective, take the plain Newton step.
        if (decrement <= 1e-10 * std::abs(f0)) {
            x += d;
            continue;
        }
        double step = 1.0;
        VectorXd trial = x + d;
        while (objective(trial, up, a, dt, p, eps) > f0 - 1e-4 * step * std::max(decrement, 0.0) + slack) {
            step *= 0.5;
            if (step < 1e-12) break;
            trial = x + step * d;
        }
        if (step < 1e-12) break;
        x = trial;
    }
    std::ostringstream msg;
    msg << "prox: Newton did not converge (relative KKT residual " << residual << ", dt " << dt << ", eps_reg " << eps
        << ")";
    throw ProxFailure(msg.str());
}

ProxResult ProxSolver::step(const GridFunction& u_prev) {
    try {
        return solve(u_prev, cfg_.dt, eps_);
    } catch (const ProxFailure& first) {
        ++retries_;
        eps_ *= 0.1;
        try {
            ProxResult half = solve(u_prev, 0.5 * cfg_.dt, eps_);
            ProxResult second = solve(half.u, 0.5 * cfg_.dt, eps_);
            second.iterations += half.iterations;
            second.kkt_residual = std::max(half.kkt_residual, second.kkt_residual);
            second.substeps = 2;
            second.at_floor = second.at_floor || half.at_floor;
            return second;
        } catch (const ProxFailure& again) {
            throw ProxFailure(std::string(first.what()) + "; retry with half steps failed: " + again.what());
        }
    }
}

ProxResult prox_step(const GridFunction& u_prev, const FlowConfig& cfg) {
    cfg.validate();
    const OperatorAssembly a = assemble(cfg.n, cfg.y, cfg.n_points);
    ProxSolver solver(a, cfg);
    return solver.step(u_prev);
}

GridFunction project_initial(const GridFunction& f, int n, const ConstraintSpace& y) {
    return project_admissible(f, n, y);
}

Polynomial project_initial(const Polynomial& f, int n, const ConstraintSpace& y) { return project_admissible(f, n, y); }

FlowRecord make_record(const OperatorAssembly& a, const GridFunction& u, double t, double p) {
    FlowRecord rec;
    rec.t = t;
    rec.mu0 = moment(u, 0);
    rec.mu1 = moment(u, 1);
    rec.mun = moment(u, a.n);
    rec.lp_energy = energy(u, p);
    rec.hy_norm_sq = a.metric_inner(u, u);
    return rec;
}

FlowRun run_flow(const GridFunction& u0, const FlowConfig& cfg, const StepObserver& observer) {
    cfg.validate();
    const OperatorAssembly a = assemble(cfg.n, cfg.y, cfg.n_points);
    return run_flow(a, u0, cfg, observer);
}

FlowRun run_flow(const OperatorAssembly& a, const GridFunction& u0, const FlowConfig& cfg, const StepObserver& observer) {
    cfg.validate();
    if (u0.size() != cfg.n_points) throw std::invalid_argument("run_flow: initial data has the wrong grid size");
    check_feasible_start(a, u0, "run_flow");
    ProxSolver solver(a, cfg);

    const auto steps = static_cast<std::size_t>(std::llround(cfg.t_final / cfg.dt));
    FlowRun run;
    run.records.reserve(steps + 1);
    run.records.push_back(make_record(a, u0, 0.0, cfg.p));
    if (observer) observer(0, 0.0, u0);

    GridFunction u = u0;
    for (std::size_t k = 1; k <= steps; ++k) {
        ProxResult res = solver.step(u);
        run.newton_iterations += res.iterations;
        if (res.at_floor) ++run.floor_limited_steps;
        const double t = static_cast<double>(k) * cfg.dt;
        FlowRecord rec = make_record(a, res.u, t, cfg.p);
        const double dv = 0.5 * (rec.hy_norm_sq - run.records.back().hy_norm_sq) / cfg.dt;
        rec.dissipation_residual = std::abs(dv + cfg.p * rec.lp_energy);
        run.records.push_back(rec);
        u = std::move(res.u);
        if (observer) observer(k, t, u);
    }
    run.final_state = u;
    run.retries = solver.retries();
    run.final_eps_reg = solver.eps_reg();
    return run;
}

DecayFit fit_decay(const std::vector<FlowRecord>& records, DecayModel model) {
    constexpr double floor = 1e-28;
    double t_end = 0.0;
    for (const auto& r : records) {
        if (r.t > 0.0 && r.hy_norm_sq >= floor) t_end = std::max(t_end, r.t);
    }
    DecayFit fit;
    fit.window_start = 0.5 * t_end;
    fit.window_end = t_end;
    std::vector<double> xs, ys;
    for (const auto& r : records) {
        if (r.t <= 0.0 || r.t < fit.window_start || r.t > t_end || r.hy_norm_sq < floor) continue;
        xs.push_back(model == DecayModel::Polynomial ? std::log(r.t) : r.t);
        ys.push_back(std::log(r.hy_norm_sq));
    }
    fit.count = xs.size();
    if (fit.count < 20) throw std::invalid_argument("fit_decay: fewer than 20 records in the fit window");

    const double m = static_cast<double>(fit.count);
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < fit.count; ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < fit.count; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.rate = -fit.slope;
    double ss_res = 0;
    for (std::size_t i = 0; i < fit.count; ++i) {
        const double e = ys[i] - fit.intercept - fit.slope * xs[i];
        ss_res += e * e;
    }
    fit.r_squared = (syy > 0.0) ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

InequalityCheck differential_inequality_check(const std::vector<FlowRecord>& records, double p) {
    const double alpha = 0.5 * p;
    InequalityCheck out;
    out.c_empirical = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < records.size(); ++i) {
        const double v = records[i].hy_norm_sq;
        if (!(v > 1e-28)) continue;
        const double dv =
            (records[i + 1].hy_norm_sq - records[i - 1].hy_norm_sq) / (records[i + 1].t - records[i - 1].t);
        ++out.points;
        out.max_violation = std::max(out.max_violation, dv);
        if (dv < 0.0) out.c_empirical = std::min(out.c_empirical, -dv / std::pow(v, alpha));
    }
    if (out.points == 0 || !std::isfinite(out.c_empirical)) out.c_empirical = 0.0;
    return out;
}

double embedding_constant(const Eigenbasis& basis, const VectorXd& weights, double p, std::size_t modes) {
    if (!(p > 1.0)) throw std::invalid_argument("embedding_constant: p must exceed 1");
    const Eigen::Index m = std::min<Eigen::Index>(static_cast<Eigen::Index>(modes), basis.vectors.cols());
    if (m < 1) throw std::invalid_argument("embedding_constant: need at least one mode");
    const MatrixXd phi_m = basis.vectors.leftCols(m);

    auto value = [&](const VectorXd& c) {
        const VectorXd u = phi_m * c;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) acc += weights(i) * std::pow(std::abs(u(i)), p);
        return acc;
    };
    auto gradient = [&](const VectorXd& c) {
        const VectorXd u = phi_m * c;
        VectorXd s(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) s(i) = weights(i) * p * psi(u(i), p, 0.0);
        return VectorXd(phi_m.transpose() * s);
    };

    std::vector<VectorXd> starts;
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(m, 4); ++k) starts.push_back(VectorXd::Unit(m, k));
    Rng rng(20240601);
    for (int s = 0; s < 8; ++s) {
        VectorXd c(m);
        for (Eigen::Index k = 0; k < m; ++k) c(k) = rng.uniform(-1.0, 1.0);
        starts.push_back(c.normalized());
    }

    double best = std::numeric_limits<double>::infinity();
    for (VectorXd c : starts) {
        double f = value(c);
        double step = 1.0;
        for (int it = 0; it < 400; ++it) {
            VectorXd g = gradient(c);
            g -= g.dot(c) * c;
            const double gn = g.squaredNorm();
            if (gn <= 1e-24 * f * f) break;
            step = std::min(1.0, 2.0 * step);
            VectorXd trial = (c - step * g / std::sqrt(gn)).normalized();
            double ft = value(trial);
            while (ft > f - 1e-4 * step * std::sqrt(gn) && step > 1e-14) {
                step *= 0.5;
                trial = (c - step * g / std::sqrt(gn)).normalized();
                ft = value(trial);
            }
            if (step <= 1e-14) break;
            c = trial;
            f = ft;
        }
        best = std::min(best, f);
    }
    return best;
}

double embedding_constant(const OperatorAssembly& a, double p, std::size_t modes) {
    return embedding_constant(eigenbasis(a), a.mass, p, modes);
}

PotentialCheck potential_diagnostic(const GridFunction& u_prev, const GridFunction& u, double dt, double p, int n,
                                    double eps_reg) {
    if (u_prev.size() != u.size()) throw std::invalid_argument("potential_diagnostic: grid size mismatch");
    if (!(dt > 0.0)) throw std::invalid_argument("potential_diagnostic: dt must be positive");
    PotentialCheck out;
    if (n < 2) return out;
    const GridFunction psi_u = energy_gradient_l2(u, p, eps_reg);
    const GridFunction residual = (u - u_prev) * (1.0 / dt) - second_derivative(psi_u);
    const auto w = trapezoid_weights(u.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double q = std::pow(1.0 - u.node(i), n - 2);
        num += w[i] * residual[i] * q;
        den += w[i] * q * q;
    }
    out.gamma_reconstructed = -num / den;
    out.gamma_formula = gamma(psi_u, n);
    const double ref = std::max(std::abs(out.gamma_formula), std::numeric_limits<double>::min());
    out.relative_gap = std::abs(out.gamma_reconstructed - out.gamma_formula) / ref;
    return out;
}

}  // namespace momentflow
