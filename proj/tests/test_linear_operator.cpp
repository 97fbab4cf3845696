#include "doctest.h"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "momentflow/moments.hpp"
#include "momentflow/operator.hpp"

using namespace momentflow;

namespace {

GridFunction smooth_admissible(std::size_t pts, int n, const ConstraintSpace& y) {
    const auto f = GridFunction::sample(pts, [](double x) { return std::cos(3.0 * x) + x * x * x; });
    return project_admissible(f, n, y);
}

const ConstraintSpace kAll[] = {ConstraintSpace::zero_zero(), ConstraintSpace::zero_free(), ConstraintSpace::line(0.5),
                                ConstraintSpace::full()};

}  // namespace

TEST_CASE("gamma") {
    Rng rng(2);
    for (int i = 0; i < 20; ++i) CHECK(gamma(random_polynomial(rng, 6), 1) == 0);
    const Polynomial f{Rational(-1, 2), 1};
    CHECK(gamma(f, 2) == 3 * f(Rational(0)));
    CHECK(gamma(Polynomial{1}, 3) == 0);
    CHECK(std::abs(gamma(GridFunction(65, 1.0), 3)) < 1e-12);
}

TEST_CASE("c_of") {
    CHECK(c_of(0, 0, ConstraintSpace::line(0.7)).c == 0);
    CHECK(c_of(5, 2, ConstraintSpace::line(0)).c == -2);
    CHECK(c_of(1, 0, ConstraintSpace::line(1)).c == -1);
    const auto full = c_of(3, 1, ConstraintSpace::full());
    CHECK(full.c == -1);
    CHECK_FALSE(full.consistent);
    CHECK(c_of(1, 1, ConstraintSpace::full()).consistent);
    CHECK_THROWS_AS(c_of(1, 0, ConstraintSpace::zero_zero()), std::domain_error);
    CHECK_THROWS_AS(c_of(1, 0, ConstraintSpace::zero_free()), std::domain_error);
}

TEST_CASE("apply_strong") {
    const GridDual z = apply_strong(GridFunction(65, 0.0), 2, ConstraintSpace::zero_zero());
    CHECK(z.regular.max_abs() == 0.0);
    CHECK(z.atom == 0.0);

    const auto u = smooth_admissible(257, 2, ConstraintSpace::zero_zero());
    const GridDual au = apply_strong(u, 2, ConstraintSpace::zero_zero());
    const auto d2 = second_derivative(u);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(au.regular[i] - (-d2[i] + 3.0 * u[0])) < 1e-12);
    CHECK(std::abs(mu0(au)) < 1e-12);

    const auto v = smooth_admissible(257, 1, ConstraintSpace::zero_free());
    const GridDual av = apply_strong(v, 1, ConstraintSpace::zero_free());
    const auto dv = second_derivative(v);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(av.regular[i] == -dv[i]);

    const auto bad = GridFunction(65, 1.0);
    CHECK_THROWS_AS(apply_strong(bad, 2, ConstraintSpace::zero_zero()), std::invalid_argument);

    const auto w = smooth_admissible(257, 2, ConstraintSpace::line(0.5));
    const GridDual aw = apply_strong(w, 2, ConstraintSpace::line(0.5));
    const GridDual plain = id_m_inverse(aw.regular);
    CHECK(aw.atom == doctest::Approx(plain.atom - c_of(w.front(), w.back(), ConstraintSpace::line(0.5)).c));
}

TEST_CASE("integration by parts") {
    const auto [lhs, rhs] = ibp_sides_exact(Polynomial{0, 0, 1}, Polynomial{1}, 2);
    CHECK(lhs == Rational(2, 9));
    CHECK(rhs == Rational(2, 9));
    Rng rng(77);
    for (int i = 0; i < 20; ++i) {
        const Polynomial h = random_polynomial(rng, 6);
        for (int n = 1; n <= 4; ++n) {
            const auto [l, r] = ibp_sides_exact(Polynomial{3, -2}, h, n);
            CHECK(l == 0);
            CHECK(r == 0);
        }
    }
    for (int i = 0; i < 200; ++i) {
        const Polynomial u = random_polynomial(rng, 6);
        const Polynomial h = random_polynomial(rng, 6);
        for (int n = 1; n <= 4; ++n) CHECK(ibp_check(u, h, n).residual <= 1e-10);
    }
}

TEST_CASE("integration by parts on the grid converges") {
    const Polynomial u{1, -2, 0, 3, 1};
    const Polynomial h{2, 1, -4};
    for (int n = 1; n <= 4; ++n) {
        const double exact = to_double(ibp_sides_exact(u, h, n).first);
        auto err = [&](std::size_t pts) {
            const IbpSides s = ibp_check(poly_to_grid(u, pts), poly_to_grid(h, pts), n);
            return std::max(std::abs(s.lhs - exact), s.residual);
        };
        CHECK(err(129) / err(257) > 3.0);
    }
}

TEST_CASE("assemble") {
    for (const auto& y : kAll) {
        const OperatorAssembly a = assemble(2, y, 65);
        CHECK(a.constraints.rows() == y.rank());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.metric);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
        CHECK((a.metric - a.metric.transpose()).norm() == 0.0);
    }
    const OperatorAssembly line = assemble(3, ConstraintSpace::line(0.25), 33);
    const auto m0 = moment_weights(33, 0);
    const auto m3 = moment_weights(33, 3);
    for (std::size_t i = 0; i < 33; ++i) CHECK(line.constraints(0, static_cast<Eigen::Index>(i)) == doctest::Approx(m3[i] - 0.25 * m0[i]));
    CHECK_THROWS(assemble(2, ConstraintSpace::zero_zero(), 9));
}

TEST_CASE("weak residual against -u'' + 3u(0)") {
    for (const auto& y : {ConstraintSpace::zero_zero(), ConstraintSpace::zero_free()}) {
        std::vector<double> res;
        for (std::size_t pts : {129u, 257u}) {
            const OperatorAssembly a = assemble(2, y, pts);
            // ZeroFree leaves mu_n free, so the domain also asks for u(0) = u(1)
            const auto u =
                y == ConstraintSpace::zero_zero()
                    ? smooth_admissible(pts, 2, y)
                    : project_admissible(GridFunction::sample(pts,
                                                              [](double x) {
                                                                  return std::sin(2 * std::numbers::pi * x) +
                                                                         x * (1 - x) - 1.0 / 6;
                                                              }),
                                         2, y);
            std::vector<GridFunction> tests;
            for (int k = 0; k < 4; ++k) {
                tests.push_back(GridFunction::sample(pts, [k](double x) { return std::pow(x, k) + std::sin(5 * x); }));
            }
            res.push_back(weak_residual(a, u, tests));
        }
        CHECK(res[0] / res[1] > 3.0);
    }
}

TEST_CASE("spectrum") {
    const auto ev = spectrum(assemble(1, ConstraintSpace::zero_free(), 257), 3);
    const double target = 4.0 * std::numbers::pi * std::numbers::pi;
    CHECK(std::abs(ev[0] - target) / target < 0.005);
    CHECK(std::abs(ev[1] - target) / target < 0.005);
    CHECK(std::abs(ev[2] - 4 * target) / (4 * target) < 0.005);

    for (int n = 1; n <= 4; ++n) {
        std::vector<double> lowest;
        for (const auto& y : kAll) {
            const auto all = spectrum(assemble(n, y, 65), 65 - static_cast<std::size_t>(y.rank()));
            for (double v : all) CHECK(v > 0.0);
            lowest.push_back(all.front());
        }
        // ZeroZero within ZeroFree within Full, and Line within Full
        CHECK(lowest[0] >= lowest[1] - 1e-9);
        CHECK(lowest[1] >= lowest[3] - 1e-9);
        CHECK(lowest[2] >= lowest[3] - 1e-9);
    }
    CHECK(suggest_dt(assemble(2, ConstraintSpace::zero_zero(), 33)) > 0.0);
}

TEST_CASE("semigroup_step") {
    const OperatorAssembly a = assemble(2, ConstraintSpace::zero_zero(), 129);
    CHECK(semigroup_step(a, GridFunction(129, 0.0), 1e-3).max_abs() == 0.0);

    const Eigenbasis basis = eigenbasis(a);
    std::vector<double> col(129);
    for (Eigen::Index i = 0; i < 129; ++i) col[static_cast<std::size_t>(i)] = basis.vectors(i, 2);
    const GridFunction phi(col);
    const double lambda = basis.values(2);
    const GridFunction stepped = semigroup_step(a, phi, 1e-3, Scheme::Exponential);
    for (std::size_t i = 0; i < 129; ++i) CHECK(std::abs(stepped[i] - std::exp(-lambda * 1e-3) * phi[i]) < 1e-10);

    const auto u0 = smooth_admissible(129, 2, a.y);
    auto gap = [&](double dt) {
        const LinearStepper ie(a, dt, Scheme::ImplicitEuler);
        const LinearStepper ex(a, dt, Scheme::Exponential);
        GridFunction u = u0, v = u0;
        const int steps = static_cast<int>(std::lround(0.1 / dt));
        for (int k = 0; k < steps; ++k) {
            u = ie.step(u);
            v = ex.step(v);
        }
        const GridFunction d = u - v;
        return std::sqrt(a.metric_inner(d, d) / a.metric_inner(v, v));
    };
    const double g1 = gap(1e-3), g2 = gap(5e-4);
    CHECK(g1 < 0.1);
    CHECK(g1 / g2 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("moment conservation and decay under the linear flow") {
    const OperatorAssembly a = assemble(2, ConstraintSpace::zero_zero(), 257);
    const double lambda1 = spectrum(a, 1).front();
    const double dt = 1e-3;
    const LinearStepper stepper(a, dt);
    GridFunction u = smooth_admissible(257, 2, a.y);
    const double norm0 = std::sqrt(a.metric_inner(u, u));
    for (int k = 1; k <= 300; ++k) {
        u = stepper.step(u);
        CHECK(std::abs(moment(u, 0)) <= 1e-10);
        CHECK(std::abs(moment(u, 2)) <= 1e-10);
        const double t = k * dt;
        CHECK(std::sqrt(a.metric_inner(u, u)) <= norm0 * std::exp(-lambda1 * t) * (1.0 + lambda1 * lambda1 * dt * t));
    }
}

TEST_CASE("eta = 0 gives the plain heat equation") {
    // With eta = 0 the stepper solves (G + dt M) u_new = G u_old + dt b gamma(u_new); the potential coefficient
    // then enters with weight 1 - eta = 1.
    const OperatorAssembly a = assemble(2, ConstraintSpace::zero_zero(), 129);
    const auto u0 = smooth_admissible(129, 2, a.y);
    const GridFunction u1 = semigroup_step(a, u0, 1e-3, Scheme::ImplicitEuler, 1.0);
    const GridFunction h1 = semigroup_step(a, u0, 1e-3, Scheme::ImplicitEuler, 0.0);
    CHECK(std::abs(moment(h1, 0)) < 1e-12);
    CHECK(std::abs(moment(h1, 2)) < 1e-12);
    CHECK((u1 - h1).max_abs() > 1e-8);
    CHECK_THROWS_AS(LinearStepper(a, 1e-3, Scheme::Exponential, 0.5), std::invalid_argument);
}

TEST_CASE("da2_diagnostic") {
    const auto z = da2_diagnostic(GridFunction(65, 0.0), 2, ConstraintSpace::zero_zero());
    CHECK(z.first == 0.0);
    CHECK(z.second == 0.0);

    const double k = 2.0 * std::numbers::pi;
    const auto s = GridFunction::sample(1025, [&](double x) { return std::sin(k * x); });
    const auto c = GridFunction::sample(1025, [&](double x) { return std::cos(k * x); });
    for (const auto& u : {s, c}) {
        const auto r = da2_diagnostic(u, 1, ConstraintSpace::zero_free());
        CHECK(std::abs(r.first) < 1e-3);
        CHECK(std::abs(r.second) < 1e-2);
    }

    std::vector<double> res;
    for (std::size_t pts : {257u, 513u}) {
        const OperatorAssembly a = assemble(2, ConstraintSpace::zero_zero(), pts);
        const LinearStepper st(a, 1e-3);
        GridFunction u = smooth_admissible(pts, 2, a.y);
        for (int i = 0; i < 100; ++i) u = st.step(u);
        const auto r = da2_diagnostic(u, 2, a.y);
        res.push_back(std::max(std::abs(r.first), std::abs(r.second)));
    }
    MESSAGE("D(A^2) residuals at t = 0.1: " << res[0] << ", " << res[1]);
    CHECK(res[1] < res[0]);
}
