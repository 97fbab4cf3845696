#include "momentflow/hminus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace momentflow {

ConstraintSpace ConstraintSpace::line(double slope) {
    if (!std::isfinite(slope)) throw std::invalid_argument("ConstraintSpace::line: slope must be finite");
    return ConstraintSpace(Kind::Line, slope);
}

ConstraintSpace ConstraintSpace::parse(const std::string& text) {
    if (text == "zero_zero" || text == "ZeroZero") return zero_zero();
    if (text == "zero_free" || text == "ZeroFree") return zero_free();
    if (text == "full" || text == "Full") return full();
    for (const std::string prefix : {"line:", "Line:"}) {
        if (text.rfind(prefix, 0) == 0) {
            const std::string rest = text.substr(prefix.size());
            std::size_t used = 0;
            double y = 0.0;
            try {
                y = std::stod(rest, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != rest.size()) {
                throw std::invalid_argument("ConstraintSpace: bad slope in '" + text + "'");
            }
            return line(y);
        }
    }
    throw std::invalid_argument("ConstraintSpace: unknown kind '" + text + "'");
}

int ConstraintSpace::rank() const {
    switch (kind_) {
        case Kind::ZeroZero: return 2;
        case Kind::ZeroFree:
        case Kind::Line: return 1;
        case Kind::Full: return 0;
    }
    return 0;
}

double ConstraintSpace::violation(double mu0, double mun) const {
    switch (kind_) {
        case Kind::ZeroZero: return std::max(std::abs(mu0), std::abs(mun));
        case Kind::ZeroFree: return std::abs(mu0);
        case Kind::Line: return std::abs(mun - slope_ * mu0);
        case Kind::Full: return 0.0;
    }
    return 0.0;
}

std::string ConstraintSpace::name() const {
    switch (kind_) {
        case Kind::ZeroZero: return "zero_zero";
        case Kind::ZeroFree: return "zero_free";
        case Kind::Line: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "line:%.17g", slope_);
            return buf;
        }
        case Kind::Full: return "full";
    }
    return "?";
}

double mu0(const GridDual& u) { return quadrature(u.regular) + u.atom; }
Rational mu0(const PolyDual& u) { return moment(u.regular, 0) + u.atom; }

GridFunction apply_Pn(const GridDual& u, int n) { return apply_Pn(u.regular, n); }
Polynomial apply_Pn(const PolyDual& u, int n) { return apply_Pn(u.regular, n); }

GridDual id_m_inverse(const GridFunction& g) { return GridDual{g, -quadrature(g)}; }
PolyDual id_m_inverse(const Polynomial& g) { return PolyDual{g, -moment(g, 0)}; }

double inner_hy(const GridDual& u, const GridDual& v, int n) {
    if (u.regular.size() != v.regular.size()) throw std::invalid_argument("inner_hy: grid size mismatch");
    return pn_inner(u.regular, v.regular, n) + mu0(u) * mu0(v);
}

Rational inner_hy(const PolyDual& u, const PolyDual& v, int n) {
    const Polynomial pu = apply_Pn(u, n);
    const Polynomial pv = apply_Pn(v, n);
    return poly_definite_integral(pu * pv, 0, 1) + mu0(u) * mu0(v);
}

std::vector<NormRatioBounds> norm_equivalence_report(int samples, const std::vector<int>& n_list, Rng& rng,
                                                     int max_degree) {
    if (samples < 1) throw std::invalid_argument("norm_equivalence_report: samples must be >= 1");
    std::vector<Polynomial> densities;
    densities.reserve(static_cast<std::size_t>(samples));
    while (static_cast<int>(densities.size()) < samples) {
        Polynomial p = random_polynomial(rng, max_degree);
        if (!p.is_zero()) densities.push_back(std::move(p));
    }
    std::vector<NormRatioBounds> out;
    for (int n : n_list) {
        NormRatioBounds b{n, std::numeric_limits<double>::infinity(), 0.0, samples};
        for (const auto& p : densities) {
            const PolyDual u{p, 0};
            const double ratio = std::sqrt(to_double(inner_hy(u, u, n) / inner_hy(u, u, 1)));
            b.min_ratio = std::min(b.min_ratio, ratio);
            b.max_ratio = std::max(b.max_ratio, ratio);
        }
        out.push_back(b);
    }
    return out;
}

double interpolation_ratio(const Polynomial& g, int n) {
    if (g.is_zero()) throw std::invalid_argument("interpolation_ratio: zero function");
    const double mu = to_double(moment(g, n));
    const double l2 = std::sqrt(to_double(poly_definite_integral(g * g, 0, 1)));
    const PolyDual u{g, 0};
    const double hy = std::sqrt(to_double(inner_hy(u, u, n)));
    return mu * mu / (l2 * hy);
}

double interpolation_ratio(const GridFunction& g, int n) {
    const double mu = moment(g, n);
    double l2sq = 0.0;
    const auto w = trapezoid_weights(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) l2sq += w[i] * g[i] * g[i];
    const GridDual u{g, 0.0};
    const double hy = std::sqrt(inner_hy(u, u, n));
    if (!(l2sq > 0.0) || !(hy > 0.0)) throw std::invalid_argument("interpolation_ratio: zero function");
    return mu * mu / (std::sqrt(l2sq) * hy);
}

double interpolation_constant_probe(int n, int samples, Rng& rng, std::size_t n_points, int max_degree) {
    if (n < 1) throw std::invalid_argument("interpolation_constant_probe: n must be >= 1");
    double best = 0.0;
    int taken = 0;
    while (taken < samples) {
        const Polynomial g = random_polynomial(rng, max_degree);
        if (g.is_zero()) continue;
        const double r = (n_points == 0) ? interpolation_ratio(g, n) : interpolation_ratio(poly_to_grid(g, n_points), n);
        best = std::max(best, r);
        ++taken;
    }
    return best;
}

}  // namespace momentflow
