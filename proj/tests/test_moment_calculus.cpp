#include "doctest.h"

#include <cmath>

#include "momentflow/hminus.hpp"
#include "momentflow/moments.hpp"
#include "momentflow/random.hpp"

using namespace momentflow;

TEST_CASE("moment examples") {
    for (int n = 0; n <= 6; ++n) CHECK(moment(Polynomial{1}, n) == Rational(1, n + 1));
    CHECK(moment(Polynomial{0, 1}, 2) == Rational(1, 12));
    CHECK(moment(Polynomial{-2, 6}, 1) == 0);
    CHECK(std::abs(moment(GridFunction(257, 1.0), 2) - 1.0 / 3.0) < 1e-5);
}

TEST_CASE("primitive") {
    CHECK(primitive(Polynomial{1}) == Polynomial{0, 1});
    CHECK(primitive(Polynomial{0, 2}) == Polynomial{0, 0, 1});
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const Polynomial f = random_polynomial(rng, 6);
        for (int n = 1; n <= 5; ++n) CHECK(n * moment(primitive(f), n - 1) == moment(f, n));
    }
    const auto g = primitive(GridFunction(33, 1.0));
    CHECK(g[0] == 0.0);
    CHECK(std::abs(g[32] - 1.0) < 1e-15);
}

TEST_CASE("apply_Pn") {
    for (int n = 1; n <= 5; ++n) CHECK(apply_Pn(Polynomial{1}, n) == Polynomial{Rational(-1, n + 1), 1});
    const Polynomial p2 = apply_Pn(Polynomial{0, 1}, 2);
    CHECK(p2 == Polynomial{Rational(-1, 12), 0, Rational(1, 2)});
    CHECK(p2(Rational(0)) == Rational(-1, 12));
    CHECK(p2(Rational(1)) == Rational(5, 12));
    for (int n = 1; n <= 5; ++n) CHECK(apply_Pn(PolyDual{Polynomial{}, 1}, n).is_zero());
}

TEST_CASE("apply_Jn") {
    for (int n = 1; n <= 5; ++n) {
        CHECK(apply_Jn(Polynomial{1}, n) == Polynomial::one_minus_x_pow(1) - Polynomial::one_minus_x_pow(n));
    }
    CHECK(apply_Jn(Polynomial{1}, 1).is_zero());
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const Polynomial u = random_polynomial(rng, 6);
        const Polynomial phi = random_polynomial(rng, 6);
        for (int n = 1; n <= 4; ++n) {
            const Polynomial j = apply_Jn(phi, n);
            CHECK(j(Rational(0)) == 0);
            CHECK(j(Rational(1)) == 0);
            const Rational lhs = poly_definite_integral(apply_Pn(u, n) * phi, 0, 1);
            const Rational rhs = poly_definite_integral(u * j, 0, 1);
            CHECK(lhs == rhs);
        }
    }
}

TEST_CASE("P_n identities on random polynomials") {
    Rng rng(21);
    for (int i = 0; i < 50; ++i) {
        const Polynomial f = random_polynomial(rng, 6);
        for (int n = 1; n <= 5; ++n) {
            const Polynomial pf = apply_Pn(f, n);
            CHECK(moment(pf, n - 1) == 0);
            CHECK(pf(Rational(0)) == -moment(f, n));
            CHECK(pf(Rational(1)) == moment(f, 0) - moment(f, n));
            CHECK(poly_definite_integral(pf, 0, 1) == moment(f, 1) - moment(f, n));
        }
    }
}

TEST_CASE("potential profile identity") {
    Rng rng(34);
    for (int i = 0; i < 30; ++i) {
        const Polynomial h = random_polynomial(rng, 6);
        for (int n = 2; n <= 5; ++n) {
            const Polynomial q = apply_Pn(Polynomial::one_minus_x_pow(n - 2), n);
            const Rational lhs = poly_definite_integral(q * apply_Pn(h, n), 0, 1);
            const Rational rhs = Rational(n, (n - 1) * (2 * n - 1)) * (moment(h, 1) - moment(h, n));
            CHECK(lhs == rhs);
        }
    }
}

TEST_CASE("grid path tracks the exact path at second order") {
    Rng rng(55);
    for (int i = 0; i < 10; ++i) {
        const Polynomial f = random_polynomial(rng, 6);
        if (f.degree() < 2) continue;
        for (int n = 1; n <= 4; ++n) {
            const Polynomial exact = apply_Pn(f, n);
            auto err = [&](std::size_t pts) {
                const auto g = apply_Pn(poly_to_grid(f, pts), n);
                double e = 0.0;
                for (std::size_t k = 0; k < pts; ++k) e = std::max(e, std::abs(g[k] - exact(g.node(k))));
                return e;
            };
            const double e1 = err(129), e2 = err(257);
            CHECK(e1 / e2 > 3.5);
        }
    }
}

TEST_CASE("first difference of P_n f reproduces f") {
    const Polynomial f{1, -3, 0, 2};
    auto err = [&](std::size_t pts) {
        const auto g = apply_Pn(poly_to_grid(f, pts), 3);
        const double h = g.spacing();
        double e = 0.0;
        for (std::size_t k = 0; k + 1 < pts; ++k) {
            const double mid = (g.node(k) + g.node(k + 1)) / 2;
            e = std::max(e, std::abs((g[k + 1] - g[k]) / h - f(mid)));
        }
        return e;
    };
    CHECK(err(129) / err(257) > 3.5);
}

TEST_CASE("project_span") {
    const auto one = project_span(Polynomial{1}, 3);
    CHECK(one.projection == Polynomial{1});
    CHECK(one.remainder.is_zero());
    for (int n = 1; n <= 4; ++n) {
        const auto q = project_span(Polynomial::one_minus_x_pow(n), n);
        CHECK(q.projection == Polynomial::one_minus_x_pow(n));
        CHECK(q.remainder.is_zero());
    }
    const auto x2 = project_span(Polynomial{0, 0, 1}, 2);
    CHECK(poly_definite_integral(x2.remainder, 0, 1) == 0);
    CHECK(moment(x2.remainder, 2) == 0);

    const auto g = project_span(poly_to_grid(Polynomial{0, 0, 1}, 257), 2);
    const auto w = trapezoid_weights(257);
    double d0 = 0.0, d2 = 0.0;
    for (std::size_t i = 0; i < 257; ++i) {
        const double x = g.remainder.node(i);
        d0 += w[i] * g.remainder[i];
        d2 += w[i] * g.remainder[i] * (1 - x) * (1 - x);
    }
    CHECK(std::abs(d0) < 1e-10);
    CHECK(std::abs(d2) < 1e-10);
}

TEST_CASE("project_span in L^q minimizes the distance") {
    const auto f = poly_to_grid(Polynomial{0, 0, 0, 1}, 129);
    const double q = 3.0;
    const auto best = project_span(f, 2, ProjectionNorm::Lq, q);
    auto dist = [&](double a, double b) {
        const auto w = trapezoid_weights(129);
        double s = 0.0;
        for (std::size_t i = 0; i < 129; ++i) {
            const double x = f.node(i);
            s += w[i] * std::pow(std::abs(f[i] - a - b * (1 - x) * (1 - x)), q);
        }
        return s;
    };
    const double d = dist(best.constant, best.slope);
    for (double da : {-1e-3, 1e-3}) {
        CHECK(dist(best.constant + da, best.slope) >= d);
        CHECK(dist(best.constant, best.slope + da) >= d);
    }
}

TEST_CASE("legendre_Q") {
    CHECK(legendre_Q(0) == Polynomial{1});
    CHECK(legendre_Q(1) == Polynomial{-1, 2});
    for (int j = 0; j <= 6; ++j) {
        for (int k = 0; k <= 6; ++k) {
            const Rational ip = poly_definite_integral(legendre_Q(j) * legendre_Q(k), 0, 1);
            if (j == k) {
                CHECK(ip == Rational(1, 2 * k + 1));
            } else {
                CHECK(ip == 0);
            }
        }
    }
}

TEST_CASE("construct_with_moments") {
    CHECK(construct_with_moments(MomentVector::leading({1, 0})) == Polynomial{-2, 6});
    CHECK(construct_with_moments(MomentVector::leading({0, 0, 0, 0})).is_zero());
    const Polynomial r = construct_with_moments(MomentVector::leading({1, 0.3}));
    CHECK(std::abs(to_double(moment(r, 0)) - 1.0) < 1e-12);
    CHECK(std::abs(to_double(moment(r, 1)) - 0.3) < 1e-12);

    const std::vector<double> targets{0.5, -0.25, 0.125, 0.2, -0.1, 0.05, 0.3, -0.2, 0.1, 0.01, 0.02};
    const Polynomial big = construct_with_moments(MomentVector::leading(targets));
    for (int k = 0; k < static_cast<int>(targets.size()); ++k) {
        CHECK(std::abs(to_double(moment(big, k)) - targets[static_cast<std::size_t>(k)]) < 1e-10);
    }
    CHECK(detail::construct_with_moments_legendre({1, 0}) == Polynomial{-2, 6});
}
