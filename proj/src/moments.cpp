#include "momentflow/moments.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace momentflow {

namespace {

void require_positive_order(int n, const char* what) {
    if (n < 1) throw std::invalid_argument(std::string(what) + ": order n must be >= 1");
}

double one_minus_x_pow(double x, int n) { return std::pow(1.0 - x, n); }

}  // namespace

std::vector<double> moment_weights(std::size_t n_points, int n) {
    if (n < 0) throw std::invalid_argument("moment_weights: negative order");
    std::vector<double> w = trapezoid_weights(n_points);
    const double last = static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) w[i] *= one_minus_x_pow(static_cast<double>(i) / last, n);
    return w;
}

double moment(const GridFunction& f, int n) {
    const auto w = moment_weights(f.size(), n);
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += w[i] * f[i];
    return acc;
}

Rational moment(const Polynomial& f, int n) {
    if (n < 0) throw std::invalid_argument("moment: negative order");
    return poly_definite_integral(Polynomial::one_minus_x_pow(n) * f, 0, 1);
}

GridFunction primitive(const GridFunction& f) {
    std::vector<double> s(f.size());
    const double half_h = 0.5 * f.spacing();
    s[0] = 0.0;
    for (std::size_t i = 1; i < f.size(); ++i) s[i] = s[i - 1] + half_h * (f[i - 1] + f[i]);
    return GridFunction(std::move(s));
}

Polynomial primitive(const Polynomial& f) { return f.antiderivative(); }

GridFunction apply_Pn(const GridFunction& f, int n) {
    require_positive_order(n, "apply_Pn");
    GridFunction s = primitive(f);
    const double mu = moment(f, n);
    std::vector<double> v(s.data());
    for (double& x : v) x -= mu;
    return GridFunction(std::move(v));
}

Polynomial apply_Pn(const Polynomial& f, int n) {
    require_positive_order(n, "apply_Pn");
    return f.antiderivative() - Polynomial::constant(moment(f, n));
}

GridFunction apply_Jn(const GridFunction& phi, int n) {
    require_positive_order(n, "apply_Jn");
    GridFunction s = primitive(phi);
    const double total = s.back();
    std::vector<double> v(phi.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = (total - s[i]) - total * one_minus_x_pow(phi.node(i), n);
    }
    v.front() = 0.0;
    v.back() = 0.0;
    return GridFunction(std::move(v));
}

Polynomial apply_Jn(const Polynomial& phi, int n) {
    require_positive_order(n, "apply_Jn");
    const Polynomial big_phi = phi.antiderivative();
    const Rational total = big_phi(Rational(1));
    return Polynomial::constant(total) - big_phi - Polynomial::one_minus_x_pow(n) * total;
}

std::vector<double> pn_quadratic_samples(const GridFunction& f, int n) {
    require_positive_order(n, "pn_quadratic_samples");
    const std::size_t cells = f.size() - 1;
    const double h = f.spacing();
    const double mu = moment(f, n);
    std::vector<double> q(2 * cells + 1);
    double s = 0.0;
    q[0] = -mu;
    for (std::size_t i = 0; i < cells; ++i) {
        q[2 * i + 1] = s + h * (3.0 * f[i] + f[i + 1]) / 8.0 - mu;
        s += 0.5 * h * (f[i] + f[i + 1]);
        q[2 * i + 2] = s - mu;
    }
    return q;
}

double quadratic_samples_inner(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 3 || a.size() % 2 == 0) {
        throw std::invalid_argument("quadratic_samples_inner: incompatible sample vectors");
    }
    const std::size_t cells = (a.size() - 1) / 2;
    const double h = 1.0 / static_cast<double>(cells);
    double acc = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        const double al = a[2 * i], am = a[2 * i + 1], ar = a[2 * i + 2];
        const double bl = b[2 * i], bm = b[2 * i + 1], br = b[2 * i + 2];
        acc += 4.0 * al * bl + 2.0 * (al * bm + am * bl) - (al * br + ar * bl) + 16.0 * am * bm +
               2.0 * (am * br + ar * bm) + 4.0 * ar * br;
    }
    return acc * h / 30.0;
}

double pn_inner(const GridFunction& f, const GridFunction& g, int n) {
    return quadratic_samples_inner(pn_quadratic_samples(f, n), pn_quadratic_samples(g, n));
}

GridSpanProjection project_span(const GridFunction& f, int n, ProjectionNorm norm, double q) {
    require_positive_order(n, "project_span");
    const std::size_t size = f.size();
    const auto w = trapezoid_weights(size);
    std::vector<double> basis(size);
    for (std::size_t i = 0; i < size; ++i) basis[i] = one_minus_x_pow(f.node(i), n);

    double g11 = 0, g12 = 0, g22 = 0, r1 = 0, r2 = 0;
    for (std::size_t i = 0; i < size; ++i) {
        g11 += w[i];
        g12 += w[i] * basis[i];
        g22 += w[i] * basis[i] * basis[i];
        r1 += w[i] * f[i];
        r2 += w[i] * basis[i] * f[i];
    }
    const double det = g11 * g22 - g12 * g12;
    assert(det > 0.0);
    double a = (g22 * r1 - g12 * r2) / det;
    double b = (g11 * r2 - g12 * r1) / det;

    if (norm == ProjectionNorm::Lq) {
        if (!(q > 1.0) || !std::isfinite(q)) throw std::invalid_argument("project_span: q must lie in (1, inf)");
        const double scale = std::max(1.0, f.max_abs());
        const double eps = 1e-10 * scale;
        auto objective = [&](double aa, double bb) {
            double acc = 0.0;
            for (std::size_t i = 0; i < size; ++i) acc += w[i] * std::pow(std::abs(f[i] - aa - bb * basis[i]), q);
            return acc / q;
        };
        double value = objective(a, b);
        for (int it = 0; it < 200; ++it) {
            double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
            for (std::size_t i = 0; i < size; ++i) {
                const double r = f[i] - a - b * basis[i];
                const double abs_r = std::abs(r);
                const double slope = std::pow(abs_r, q - 2.0) * r;
                const double curv =
                    (q < 2.0) ? (q - 1.0) * std::pow(r * r + eps * eps, 0.5 * (q - 2.0)) : (q - 1.0) * std::pow(abs_r, q - 2.0);
                ga -= w[i] * slope;
                gb -= w[i] * slope * basis[i];
                haa += w[i] * curv;
                hab += w[i] * curv * basis[i];
                hbb += w[i] * curv * basis[i] * basis[i];
            }
            const double ridge = 1e-14 * (haa + hbb) + 1e-300;
            haa += ridge;
            hbb += ridge;
            const double hdet = haa * hbb - hab * hab;
            if (!(hdet > 0.0)) break;
            const double da = -(hbb * ga - hab * gb) / hdet;
            const double db = -(haa * gb - hab * ga) / hdet;
            const double decrement = -(ga * da + gb * db);
            if (!(decrement > 0.0)) break;
            double step = 1.0;
            double trial = objective(a + da, b + db);
            while (trial > value - 1e-4 * step * decrement && step > 1e-12) {
                step *= 0.5;
                trial = objective(a + step * da, b + step * db);
            }
            if (trial > value) break;
            a += step * da;
            b += step * db;
            const bool converged = std::abs(step * da) + std::abs(step * db) <= 1e-15 * (scale + std::abs(a) + std::abs(b));
            value = trial;
            if (converged) break;
        }
    }

    std::vector<double> proj(size), rem(size);
    for (std::size_t i = 0; i < size; ++i) {
        proj[i] = a + b * basis[i];
        rem[i] = f[i] - proj[i];
    }
    return {GridFunction(std::move(proj)), GridFunction(std::move(rem)), a, b};
}

PolySpanProjection project_span(const Polynomial& f, int n) {
    require_positive_order(n, "project_span");
    // Exact L2 Gram of {1, (1-x)^n}.
    const Rational g11 = 1;
    const Rational g12 = Rational(1, n + 1);
    const Rational g22 = Rational(1, 2 * n + 1);
    const Rational r1 = moment(f, 0);
    const Rational r2 = moment(f, n);
    const Rational det = g11 * g22 - g12 * g12;
    const Rational a = (g22 * r1 - g12 * r2) / det;
    const Rational b = (g11 * r2 - g12 * r1) / det;
    Polynomial proj = Polynomial::constant(a) + Polynomial::one_minus_x_pow(n) * b;
    Polynomial rem = f - proj;
    return {std::move(proj), std::move(rem), a, b};
}

Polynomial legendre_Q(int k) {
    if (k < 0) throw std::invalid_argument("legendre_Q: negative degree");
    Polynomial prev = Polynomial::constant(1);
    if (k == 0) return prev;
    const Polynomial t({Rational(-1), Rational(2)});  // 2x - 1
    Polynomial curr = t;
    for (int j = 1; j < k; ++j) {
        Polynomial next = (t * curr) * Rational(2 * j + 1, j + 1) - prev * Rational(j, j + 1);
        prev = std::move(curr);
        curr = std::move(next);
    }
    return curr;
}

MomentVector::MomentVector(std::vector<int> idx, std::vector<double> vals)
    : indices(std::move(idx)), entries(std::move(vals)) {
    if (indices.size() != entries.size()) throw std::invalid_argument("MomentVector: length mismatch");
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0) throw std::invalid_argument("MomentVector: negative index");
        if (!std::isfinite(entries[i])) throw std::invalid_argument("MomentVector: non-finite entry");
        for (std::size_t j = 0; j < i; ++j) {
            if (indices[j] == indices[i]) throw std::invalid_argument("MomentVector: repeated index");
        }
    }
}

MomentVector MomentVector::leading(std::vector<double> entries) {
    std::vector<int> idx(entries.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    return MomentVector(std::move(idx), std::move(entries));
}

namespace detail {

Polynomial construct_with_moments_monomial(const std::vector<Rational>& targets) {
    const std::size_t m = targets.size();
    if (m == 0) return {};
    // mu_i(x^j) = i! j! / (i + j + 1)!
    std::vector<std::vector<Rational>> a(m, std::vector<Rational>(m + 1));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            mpz_class num, fi, fj, fij;
            mpz_fac_ui(fi.get_mpz_t(), i);
            mpz_fac_ui(fj.get_mpz_t(), j);
            mpz_fac_ui(fij.get_mpz_t(), i + j + 1);
            num = fi * fj;
            a[i][j] = Rational(num, fij);
            a[i][j].canonicalize();
        }
        a[i][m] = targets[i];
    }
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        while (pivot < m && a[pivot][col] == 0) ++pivot;
        if (pivot == m) throw std::logic_error("construct_with_moments: singular moment matrix");
        std::swap(a[pivot], a[col]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col || a[r][col] == 0) continue;
            const Rational factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= m; ++c) a[r][c] -= factor * a[col][c];
        }
    }
    std::vector<Rational> coeffs(m);
    for (std::size_t i = 0; i < m; ++i) coeffs[i] = a[i][m] / a[i][i];
    return Polynomial(std::move(coeffs));
}

Polynomial construct_with_moments_legendre(const std::vector<Rational>& targets) {
    // mu_i(Q_k) = 0 for k > i, so the system is lower triangular.
    const std::size_t m = targets.size();
    std::vector<Polynomial> q(m);
    for (std::size_t k = 0; k < m; ++k) q[k] = legendre_Q(static_cast<int>(k));
    std::vector<Rational> a(m);
    Polynomial result;
    for (std::size_t i = 0; i < m; ++i) {
        Rational rhs = targets[i];
        for (std::size_t k = 0; k < i; ++k) rhs -= a[k] * moment(q[k], static_cast<int>(i));
        const Rational diag = moment(q[i], static_cast<int>(i));
        assert(diag != 0);
        a[i] = rhs / diag;
        result += q[i] * a[i];
    }
    return result;
}

}  // namespace detail

Polynomial construct_with_moments(const MomentVector& targets) {
    for (std::size_t i = 0; i < targets.indices.size(); ++i) {
        if (targets.indices[i] != static_cast<int>(i)) {
            throw std::invalid_argument("construct_with_moments: indices must be 0..m in order");
        }
    }
    std::vector<Rational> exact(targets.entries.size());
    for (std::size_t i = 0; i < exact.size(); ++i) exact[i] = to_rational(targets.entries[i]);
    if (exact.size() <= 9) return detail::construct_with_moments_monomial(exact);
    return detail::construct_with_moments_legendre(exact);
}

}  // namespace momentflow
