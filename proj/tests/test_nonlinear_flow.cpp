#include "doctest.h"

#include <cmath>
#include <string>

#include "momentflow/flow.hpp"
#include "momentflow/moments.hpp"

using namespace momentflow;

namespace {

GridFunction random_admissible(Rng& rng, std::size_t pts, int n, const ConstraintSpace& y) {
    std::vector<double> v(pts);
    for (auto& e : v) e = rng.uniform(-1, 1);
    return project_initial(GridFunction(v), n, y);
}

GridFunction smooth_initial(std::size_t pts, double amplitude = 1.0) {
    return project_initial(poly_to_grid(Polynomial{1, -6, 6, 1}, pts) * amplitude, 2, ConstraintSpace::zero_zero());
}

FlowConfig small_config(double p, std::size_t pts = 65) {
    FlowConfig cfg;
    cfg.p = p;
    cfg.n = 2;
    cfg.n_points = pts;
    cfg.dt = 1e-3;
    cfg.t_final = 0.2;
    return cfg;
}

double objective(const OperatorAssembly& a, const GridFunction& f, const GridFunction& u, double dt, double p) {
    const GridFunction d = f - u;
    return dt * energy(f, p) + 0.5 * a.metric_inner(d, d);
}

}  // namespace

TEST_CASE("FlowConfig validation names the field") {
    FlowConfig cfg;
    cfg.p = 1.0;
    try {
        cfg.validate();
        FAIL("p = 1 accepted");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).rfind("p:", 0) == 0);
    }
    cfg.p = 0.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.p = 3;
    cfg.prox_tol = 0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("prox_tol"), std::invalid_argument);
    cfg.prox_tol = 1e-10;
    cfg.dt = -1;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("dt"), std::invalid_argument);
}

TEST_CASE("energy") {
    CHECK(energy(GridFunction(33, 0.0), 3) == 0.0);
    CHECK(energy(GridFunction(33, 1.0), 2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(energy(poly_to_grid(Polynomial{-2, 6}, 1025), 2) - 2.0) < 1e-5);
    CHECK_THROWS_AS(energy(GridFunction(33, 1.0), 1.0), std::invalid_argument);
}

TEST_CASE("energy_gradient_l2") {
    Rng rng(6);
    const auto f = random_admissible(rng, 33, 2, ConstraintSpace::full());
    const auto g2 = energy_gradient_l2(f, 2);
    for (std::size_t i = 0; i < 33; ++i) CHECK(g2[i] == f[i]);
    const auto g4 = energy_gradient_l2(GridFunction(33, 2.0), 4);
    for (std::size_t i = 0; i < 33; ++i) CHECK(g4[i] == doctest::Approx(8.0).epsilon(1e-15));

    const auto w = trapezoid_weights(65);
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto fr = random_admissible(rng, 65, 2, ConstraintSpace::full());
            const auto h = random_admissible(rng, 65, 2, ConstraintSpace::full());
            const double delta = 1e-6;
            const double fd = (energy(fr + delta * h, p) - energy(fr - delta * h, p)) / (2 * delta);
            const auto g = energy_gradient_l2(fr, p, 1e-8);
            double ip = 0.0;
            for (std::size_t i = 0; i < 65; ++i) ip += w[i] * g[i] * h[i];
            CHECK(std::abs(fd - ip) <= 1e-6 * std::max(1.0, std::abs(ip)));
        }
    }
}

TEST_CASE("project_initial") {
    const auto y = ConstraintSpace::zero_zero();
    const auto ones = project_initial(GridFunction(129, 1.0), 2, y);
    CHECK(std::abs(moment(ones, 0)) < 1e-12);
    CHECK(std::abs(moment(ones, 2)) < 1e-12);
    const auto again = project_initial(ones, 2, y);
    for (std::size_t i = 0; i < 129; ++i) CHECK(std::abs(again[i] - ones[i]) < 1e-14);
    Rng rng(1);
    const auto f = random_admissible(rng, 33, 2, ConstraintSpace::full());
    CHECK((project_initial(f, 2, ConstraintSpace::full()) - f).max_abs() == 0.0);
    const Polynomial exact = project_initial(Polynomial{1}, 2, y);
    CHECK(moment(exact, 0) == 0);
    CHECK(moment(exact, 2) == 0);
}

TEST_CASE("prox_step") {
    FlowConfig cfg = small_config(3.0);
    CHECK(prox_step(GridFunction(65, 0.0), cfg).u.max_abs() == 0.0);

    Rng rng(12);
    cfg.p = 2.0;
    const OperatorAssembly a = assemble(2, cfg.y, 65);
    for (int trial = 0; trial < 5; ++trial) {
        const auto u = random_admissible(rng, 65, 2, cfg.y);
        const auto prox = prox_step(u, cfg).u;
        const auto lin = semigroup_step(a, u, cfg.dt, Scheme::ImplicitEuler);
        const auto d = prox - lin;
        CHECK(std::sqrt(a.metric_inner(d, d)) <= 1e-8 * std::sqrt(a.metric_inner(lin, lin)));
    }
}

TEST_CASE("prox_step decreases the objective and the energy") {
    Rng rng(99);
    for (double p : {1.5, 3.0, 4.0}) {
        FlowConfig cfg = small_config(p, 33);
        const OperatorAssembly a = assemble(2, cfg.y, 33);
        ProxSolver solver(a, cfg);
        for (int trial = 0; trial < 100; ++trial) {
            const auto u = random_admissible(rng, 33, 2, cfg.y);
            const auto res = solver.step(u);
            CHECK(energy(res.u, p) <= energy(u, p) * (1 + 1e-12));
            CHECK(objective(a, res.u, u, cfg.dt, p) <= objective(a, u, u, cfg.dt, p));
            CHECK(std::abs(moment(res.u, 0)) < 1e-10);
            CHECK(std::abs(moment(res.u, 2)) < 1e-10);
        }
    }
}

TEST_CASE("run_flow from zero stays zero") {
    const FlowRun run = run_flow(GridFunction(65, 0.0), small_config(3.0));
    CHECK(run.records.size() == 201);
    for (const auto& r : run.records) {
        CHECK(r.hy_norm_sq == 0.0);
        CHECK(r.lp_energy == 0.0);
        CHECK(r.dissipation_residual == 0.0);
    }
}

TEST_CASE("run_flow rejects inadmissible data") {
    CHECK_THROWS_AS(run_flow(GridFunction(65, 1.0), small_config(3.0)), std::invalid_argument);
}

TEST_CASE("flow invariants, p = 3") {
    const FlowConfig cfg = small_config(3.0, 129);
    const FlowRun run = run_flow(smooth_initial(129), cfg);
    for (std::size_t i = 0; i < run.records.size(); ++i) {
        const auto& r = run.records[i];
        CHECK(std::abs(r.mu0) <= 1e-8);
        CHECK(std::abs(r.mun) <= 1e-8);
        if (i > 0) {
            CHECK(r.t > run.records[i - 1].t);
            CHECK(r.lp_energy <= run.records[i - 1].lp_energy);
            CHECK(r.hy_norm_sq < run.records[i - 1].hy_norm_sq);
        }
    }
    const InequalityCheck ic = differential_inequality_check(run.records, 3.0);
    CHECK(ic.max_violation <= 0.0);
    CHECK(ic.c_empirical > 0.0);
}

TEST_CASE("contraction, p = 3") {
    const FlowConfig cfg = small_config(3.0, 65);
    const OperatorAssembly a = assemble(2, cfg.y, 65);
    Rng rng(31);
    const auto u0 = smooth_initial(65);
    const auto v0 = random_admissible(rng, 65, 2, cfg.y);
    ProxSolver su(a, cfg), sv(a, cfg);
    GridFunction u = u0, v = v0;
    GridFunction d = u - v;
    double prev = std::sqrt(a.metric_inner(d, d));
    for (int k = 0; k < 100; ++k) {
        u = su.step(u).u;
        v = sv.step(v).u;
        d = u - v;
        const double dist = std::sqrt(a.metric_inner(d, d));
        CHECK(dist <= prev + 1e-8);
        prev = dist;
    }
}

TEST_CASE("dissipation residual shrinks under refinement") {
    auto mean_residual = [](std::size_t pts, double dt) {
        FlowConfig cfg = small_config(4.0, pts);
        cfg.dt = dt;
        cfg.t_final = 0.1;
        const FlowRun run = run_flow(smooth_initial(pts), cfg);
        double s = 0.0;
        for (std::size_t i = 1; i < run.records.size(); ++i) s += run.records[i].dissipation_residual;
        return s / static_cast<double>(run.records.size() - 1);
    };
    const double coarse = mean_residual(65, 2e-3);
    const double fine = mean_residual(129, 5e-4);
    CHECK(coarse / fine >= 3.0);
}

TEST_CASE("L^p energy is monotone and convex in time") {
    const FlowRun run = run_flow(smooth_initial(65), small_config(4.0, 65));
    const auto& r = run.records;
    for (std::size_t i = 1; i + 1 < r.size(); ++i) {
        CHECK(r[i + 1].lp_energy <= r[i].lp_energy + 1e-12);
        if (r[i].t >= 0.05) CHECK(r[i + 1].lp_energy - 2 * r[i].lp_energy + r[i - 1].lp_energy >= -1e-8);
    }
}

TEST_CASE("fast diffusion runs through extinction") {
    FlowConfig cfg = small_config(1.5, 65);
    cfg.t_final = 0.3;
    const FlowRun run = run_flow(smooth_initial(65), cfg);
    CHECK(run.records.size() == 301);
    for (const auto& r : run.records) CHECK(std::isfinite(r.hy_norm_sq));
    CHECK(run.final_state.max_abs() == 0.0);
}

TEST_CASE("fit_decay") {
    // heat flow: hy_norm_sq decays like exp(-2 lambda_1 t)
    FlowConfig cfg = small_config(2.0, 129);
    cfg.t_final = 0.3;
    cfg.dt = 2.5e-4;
    const OperatorAssembly a = assemble(2, cfg.y, 129);
    const FlowRun run = run_flow(a, smooth_initial(129), cfg);
    const double lambda1 = spectrum(a, 1).front();
    const DecayFit fit = fit_decay(run.records, DecayModel::Exponential);
    CHECK(fit.r_squared > 0.999);
    CHECK(fit.rate == doctest::Approx(2 * lambda1).epsilon(0.02));
    CHECK(fit.window_start == doctest::Approx(0.15));

    const InequalityCheck ic = differential_inequality_check(run.records, 2.0);
    CHECK(ic.c_empirical == doctest::Approx(2 * lambda1).epsilon(0.05));

    std::vector<FlowRecord> few(run.records.begin(), run.records.begin() + 10);
    CHECK_THROWS_AS(fit_decay(few, DecayModel::Exponential), std::invalid_argument);

    // records below the underflow floor are dropped before the window is placed
    std::vector<FlowRecord> tail = run.records;
    for (std::size_t i = 600; i < tail.size(); ++i) tail[i].hy_norm_sq = 1e-40;
    const DecayFit cut = fit_decay(tail, DecayModel::Exponential);
    CHECK(cut.window_end == doctest::Approx(tail[599].t));
}

TEST_CASE("differential inequality on a zero flow is vacuous") {
    std::vector<FlowRecord> zero(10);
    for (std::size_t i = 0; i < zero.size(); ++i) zero[i].t = 0.1 * static_cast<double>(i);
    const InequalityCheck ic = differential_inequality_check(zero, 3.0);
    CHECK(ic.points == 0);
    CHECK(ic.max_violation == 0.0);
}

TEST_CASE("embedding constant and potential diagnostic") {
    const OperatorAssembly a = assemble(2, ConstraintSpace::zero_zero(), 129);
    // for p = 2 the Rayleigh minimum is the smallest eigenvalue
    CHECK(embedding_constant(a, 2.0) == doctest::Approx(spectrum(a, 1).front()).epsilon(1e-6));
    CHECK(embedding_constant(a, 4.0) > 0.0);

    FlowConfig cfg = small_config(3.0, 257);
    const auto u0 = smooth_initial(257);
    GridFunction prev = u0, cur = u0;
    run_flow(u0, cfg, [&](std::size_t step, double, const GridFunction& u) {
        if (step == 99) prev = u;
        if (step == 100) cur = u;
    });
    const PotentialCheck pc = potential_diagnostic(prev, cur, cfg.dt, 3.0, 2);
    MESSAGE("potential diagnostic gap " << pc.relative_gap);
    CHECK(std::isfinite(pc.relative_gap));
}
