#include "momentflow/operator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "momentflow/moments.hpp"

namespace momentflow {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd to_eigen(const GridFunction& f) { return Eigen::Map<const VectorXd>(f.data().data(), f.size()); }

VectorXd to_eigen(const std::vector<double>& v) { return Eigen::Map<const VectorXd>(v.data(), v.size()); }

GridFunction from_eigen(const VectorXd& v) { return GridFunction(std::vector<double>(v.data(), v.data() + v.size())); }

void require_order(int n, const char* what) {
    if (n < 1) throw std::invalid_argument(std::string(what) + ": order n must be >= 1");
}

GridFunction potential_profile(std::size_t n_points, int n) {
    if (n < 2) return GridFunction(n_points, 0.0);
    return GridFunction::sample(n_points, [n](double x) { return std::pow(1.0 - x, n - 2); });
}

// Columns of T: samples of P_n e_j on nodes and midpoints.
MatrixXd sample_map(std::size_t n_points, int n) {
    MatrixXd t(2 * n_points - 1, n_points);
    std::vector<double> unit(n_points, 0.0);
    for (std::size_t j = 0; j < n_points; ++j) {
        unit[j] = 1.0;
        t.col(static_cast<Eigen::Index>(j)) = to_eigen(pn_quadratic_samples(GridFunction(unit), n));
        unit[j] = 0.0;
    }
    return t;
}

// Q * T with Q the block P2 mass matrix on the refined samples.
MatrixXd apply_quadratic_mass(const MatrixXd& t) {
    const Eigen::Index cells = (t.rows() - 1) / 2;
    const double h = 1.0 / static_cast<double>(cells);
    const double local[3][3] = {{4, 2, -1}, {2, 16, 2}, {-1, 2, 4}};
    MatrixXd qt = MatrixXd::Zero(t.rows(), t.cols());
    for (Eigen::Index c = 0; c < cells; ++c) {
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) qt.row(2 * c + a) += (local[a][b] * h / 30.0) * t.row(2 * c + b);
        }
    }
    return qt;
}

MatrixXd null_basis(const OperatorAssembly& a) {
    const auto size = static_cast<Eigen::Index>(a.n_points);
    const Eigen::Index r = a.constraints.rows();
    if (r == 0) return MatrixXd::Identity(size, size);
    Eigen::HouseholderQR<MatrixXd> qr(a.constraints.transpose());
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(size, size);
    return q.rightCols(size - r);
}

void check_admissible(const GridFunction& u, int n, const ConstraintSpace& y, double tol, const char* what) {
    const double v = y.violation(moment(u, 0), moment(u, n));
    if (v > tol * (1.0 + u.max_abs())) {
        throw std::invalid_argument(std::string(what) + ": moments violate the constraint space " + y.name() +
                                    " (violation " + std::to_string(v) + ")");
    }
}

}  // namespace

double gamma(const GridFunction& f, int n) {
    require_order(n, "gamma");
    if (n == 1) return 0.0;
    const double a = (n - 1) * (2 * n - 1);
    return a * f.front() - a * (n - 1) * moment(f, n - 2);
}

Rational gamma(const Polynomial& f, int n) {
    require_order(n, "gamma");
    if (n == 1) return 0;
    const Rational a = (n - 1) * (2 * n - 1);
    return a * f(Rational(0)) - a * (n - 1) * moment(f, n - 2);
}

AtomCoefficient c_of(double f0, double f1, const ConstraintSpace& y, double tol) {
    switch (y.kind()) {
        case ConstraintSpace::Kind::Line: return {-f1 - (f0 - f1) * y.slope(), true};
        case ConstraintSpace::Kind::Full: return {-f1, std::abs(f0 - f1) <= tol * (1.0 + std::abs(f0) + std::abs(f1))};
        default: throw std::domain_error("c_of: no atom term for " + y.name());
    }
}

double OperatorAssembly::metric_inner(const GridFunction& u, const GridFunction& v) const {
    return to_eigen(u).dot(metric * to_eigen(v));
}

double OperatorAssembly::mass_inner(const GridFunction& u, const GridFunction& v) const {
    return to_eigen(u).cwiseProduct(mass).dot(to_eigen(v));
}

VectorXd OperatorAssembly::constraint_values(const GridFunction& u) const { return constraints * to_eigen(u); }

OperatorAssembly assemble(int n, const ConstraintSpace& y, std::size_t n_points) {
    require_order(n, "assemble");
    if (n_points < 17) throw std::invalid_argument("assemble: need at least 17 grid points");
    OperatorAssembly a;
    a.n = n;
    a.y = y;
    a.n_points = n_points;

    const MatrixXd t = sample_map(n_points, n);
    const MatrixXd qt = apply_quadratic_mass(t);
    const VectorXd m0 = to_eigen(moment_weights(n_points, 0));
    const VectorXd mn = to_eigen(moment_weights(n_points, n));
    MatrixXd pn_gram = t.transpose() * qt;
    pn_gram = 0.5 * (pn_gram + pn_gram.transpose()).eval();
    a.metric = pn_gram + m0 * m0.transpose();
    a.mass = to_eigen(trapezoid_weights(n_points));

    const auto size = static_cast<Eigen::Index>(n_points);
    switch (y.kind()) {
        case ConstraintSpace::Kind::ZeroZero:
            a.constraints.resize(2, size);
            a.constraints.row(0) = m0.transpose();
            a.constraints.row(1) = mn.transpose();
            break;
        case ConstraintSpace::Kind::ZeroFree:
            a.constraints = m0.transpose();
            break;
        case ConstraintSpace::Kind::Line:
            a.constraints = (mn - y.slope() * m0).transpose();
            break;
        case ConstraintSpace::Kind::Full:
            a.constraints.resize(0, size);
            break;
    }

    a.potential_row = pn_gram * to_eigen(potential_profile(n_points, n));
    a.gamma_row = VectorXd::Zero(size);
    if (n >= 2) {
        const double c = (n - 1) * (2 * n - 1);
        a.gamma_row = -c * (n - 1) * to_eigen(moment_weights(n_points, n - 2));
        a.gamma_row(0) += c;
    }
    return a;
}

GridFunction project_admissible(const GridFunction& f, int n, const ConstraintSpace& y) {
    require_order(n, "project_admissible");
    const GridFunction one(f.size(), 1.0);
    const GridFunction qn = GridFunction::sample(f.size(), [n](double x) { return std::pow(1.0 - x, n); });
    switch (y.kind()) {
        case ConstraintSpace::Kind::Full: return f;
        case ConstraintSpace::Kind::ZeroFree: return f - one * (moment(f, 0) / moment(one, 0));
        case ConstraintSpace::Kind::ZeroZero: {
            const double a11 = moment(one, 0), a12 = moment(qn, 0), a21 = moment(one, n), a22 = moment(qn, n);
            const double r1 = moment(f, 0), r2 = moment(f, n);
            const double det = a11 * a22 - a12 * a21;
            const double a = (a22 * r1 - a12 * r2) / det;
            const double b = (a11 * r2 - a21 * r1) / det;
            return f - one * a - qn * b;
        }
        case ConstraintSpace::Kind::Line: {
            auto row = [&](const GridFunction& g) { return moment(g, n) - y.slope() * moment(g, 0); };
            const double r_one = row(one), r_qn = row(qn);
            if (std::abs(r_one) >= std::abs(r_qn)) return f - one * (row(f) / r_one);
            return f - qn * (row(f) / r_qn);
        }
    }
    return f;
}

Polynomial project_admissible(const Polynomial& f, int n, const ConstraintSpace& y) {
    require_order(n, "project_admissible");
    const Polynomial one = Polynomial::constant(1);
    const Polynomial qn = Polynomial::one_minus_x_pow(n);
    switch (y.kind()) {
        case ConstraintSpace::Kind::Full: return f;
        case ConstraintSpace::Kind::ZeroFree: return f - one * moment(f, 0);
        case ConstraintSpace::Kind::ZeroZero: {
            const Rational a11 = 1, a12 = moment(qn, 0), a21 = moment(one, n), a22 = moment(qn, n);
            const Rational r1 = moment(f, 0), r2 = moment(f, n);
            const Rational det = a11 * a22 - a12 * a21;
            const Rational a = (a22 * r1 - a12 * r2) / det;
            const Rational b = (a11 * r2 - a21 * r1) / det;
            return f - one * a - qn * b;
        }
        case ConstraintSpace::Kind::Line: {
            const Rational slope = to_rational(y.slope());
            auto row = [&](const Polynomial& g) { return Rational(moment(g, n) - slope * moment(g, 0)); };
            const Rational r_one = row(one), r_qn = row(qn);
            if (abs(r_one) >= abs(r_qn)) return f - one * (row(f) / r_one);
            return f - qn * (row(f) / r_qn);
        }
    }
    return f;
}

GridDual apply_strong(const GridFunction& u, int n, const ConstraintSpace& y, double tol) {
    require_order(n, "apply_strong");
    check_admissible(u, n, y, tol, "apply_strong");
    GridFunction g = second_derivative(u) * -1.0;
    if (n >= 2) g += potential_profile(u.size(), n) * gamma(u, n);
    GridDual out = id_m_inverse(g);
    if (y.kind() == ConstraintSpace::Kind::Line || y.kind() == ConstraintSpace::Kind::Full) {
        out.atom -= c_of(u.front(), u.back(), y).c;
    }
    return out;
}

std::pair<Rational, Rational> ibp_sides_exact(const Polynomial& u, const Polynomial& h, int n) {
    require_order(n, "ibp_check");
    const Rational lhs = inner_hy(id_m_inverse(u.derivative().derivative()), PolyDual{h, 0}, n);
    const Rational u0 = u(Rational(0));
    const Rational u1 = u(Rational(1));
    const Rational mm = (n >= 2) ? Rational(n * (n - 1) * moment(u, n - 2)) : Rational(0);
    const Rational rhs = -poly_definite_integral(u * h, 0, 1) + u1 * moment(h, 0) + (n * u0 - mm) * moment(h, 1) +
                         ((1 - n) * u0 - u1 + mm) * moment(h, n);
    return {lhs, rhs};
}

IbpSides ibp_check(const Polynomial& u, const Polynomial& h, int n) {
    const auto [lhs, rhs] = ibp_sides_exact(u, h, n);
    return {to_double(lhs), to_double(rhs), to_double(abs(lhs - rhs))};
}

IbpSides ibp_check(const GridFunction& u, const GridFunction& h, int n) {
    require_order(n, "ibp_check");
    if (u.size() != h.size()) throw std::invalid_argument("ibp_check: grid size mismatch");
    const double lhs = inner_hy(id_m_inverse(second_derivative(u)), GridDual{h, 0.0}, n);
    const auto w = trapezoid_weights(u.size());
    double uh = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) uh += w[i] * u[i] * h[i];
    const double mm = (n >= 2) ? n * (n - 1) * moment(u, n - 2) : 0.0;
    const double rhs = -uh + u.back() * moment(h, 0) + (n * u.front() - mm) * moment(h, 1) +
                       ((1 - n) * u.front() - u.back() + mm) * moment(h, n);
    return {lhs, rhs, std::abs(lhs - rhs)};
}

double weak_residual(const OperatorAssembly& a, const GridFunction& u, const std::vector<GridFunction>& tests) {
    const GridDual au = apply_strong(u, a.n, a.y);
    double worst = 0.0;
    for (const auto& t : tests) {
        const GridFunction h = project_admissible(t, a.n, a.y);
        const double lhs = inner_hy(au, GridDual{h, 0.0}, a.n);
        worst = std::max(worst, std::abs(lhs - a.mass_inner(u, h)));
    }
    return worst;
}

std::vector<double> spectrum(const OperatorAssembly& a, std::size_t k) {
    if (k < 1) throw std::invalid_argument("spectrum: k must be >= 1");
    const MatrixXd z = null_basis(a);
    const MatrixXd mr = z.transpose() * a.mass.asDiagonal() * z;
    const MatrixXd gr = z.transpose() * a.metric * z;
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(mr, gr, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectrum: eigensolver did not converge");
    const auto count = std::min<std::size_t>(k, static_cast<std::size_t>(es.eigenvalues().size()));
    return {es.eigenvalues().data(), es.eigenvalues().data() + count};
}

Eigenbasis eigenbasis(const OperatorAssembly& a) {
    const MatrixXd z = null_basis(a);
    const MatrixXd mr = z.transpose() * a.mass.asDiagonal() * z;
    const MatrixXd gr = z.transpose() * a.metric * z;
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(mr, gr, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigenbasis: eigensolver did not converge");
    return {es.eigenvalues(), z * es.eigenvectors()};
}

double suggest_dt(const OperatorAssembly& a) {
    const auto values = spectrum(a, a.n_points);
    return 1.0 / values.back();
}

LinearStepper::LinearStepper(const OperatorAssembly& a, double dt, Scheme scheme, double eta, std::size_t modes)
    : asm_(&a), dt_(dt), scheme_(scheme) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("LinearStepper: dt must be positive");
    if (!std::isfinite(eta)) throw std::invalid_argument("LinearStepper: eta must be finite");
    if (scheme == Scheme::ImplicitEuler) {
        const auto size = static_cast<Eigen::Index>(a.n_points);
        const Eigen::Index r = a.constraints.rows();
        MatrixXd k = MatrixXd::Zero(size + r, size + r);
        k.topLeftCorner(size, size) = a.metric;
        k.topLeftCorner(size, size).diagonal() += dt * a.mass;
        if (eta != 1.0) k.topLeftCorner(size, size) -= dt * (1.0 - eta) * a.potential_row * a.gamma_row.transpose();
        k.topRightCorner(size, r) = a.constraints.transpose();
        k.bottomLeftCorner(r, size) = a.constraints;
        kkt_.compute(k);
    } else {
        if (eta != 1.0) throw std::invalid_argument("LinearStepper: the exponential scheme needs eta = 1");
        Eigenbasis basis = eigenbasis(a);
        const Eigen::Index m =
            (modes == 0) ? basis.values.size() : std::min<Eigen::Index>(static_cast<Eigen::Index>(modes), basis.values.size());
        modes_ = basis.vectors.leftCols(m);
        decay_ = (-dt * basis.values.head(m).array()).exp().matrix();
    }
}

GridFunction LinearStepper::step(const GridFunction& u) const {
    const OperatorAssembly& a = *asm_;
    if (u.size() != a.n_points) throw std::invalid_argument("LinearStepper: grid size mismatch");
    const VectorXd x = to_eigen(u);
    if (scheme_ == Scheme::ImplicitEuler) {
        const auto size = static_cast<Eigen::Index>(a.n_points);
        VectorXd rhs = VectorXd::Zero(size + a.constraints.rows());
        rhs.head(size) = a.metric * x;
        const VectorXd sol = kkt_.solve(rhs);
        if (!sol.allFinite()) throw std::runtime_error("LinearStepper: singular KKT system");
        return from_eigen(sol.head(size));
    }
    const VectorXd coeffs = modes_.transpose() * (a.metric * x);
    return from_eigen(modes_ * decay_.cwiseProduct(coeffs));
}

GridFunction semigroup_step(const OperatorAssembly& a, const GridFunction& u, double dt, Scheme scheme, double eta) {
    return LinearStepper(a, dt, scheme, eta).step(u);
}

std::pair<double, double> da2_diagnostic(const GridFunction& u, int n, const ConstraintSpace& y) {
    require_order(n, "da2_diagnostic");
    GridFunction w = second_derivative(u);
    if (n >= 2) w -= potential_profile(u.size(), n) * gamma(u, n);
    const double m0 = moment(w, 0);
    switch (y.kind()) {
        case ConstraintSpace::Kind::ZeroZero: return {m0, moment(w, n)};
        case ConstraintSpace::Kind::ZeroFree: return {m0, w.front() - w.back()};
        case ConstraintSpace::Kind::Line: {
            const double c = c_of(u.front(), u.back(), y).c;
            return {m0 - c, moment(w, n) - y.slope() * m0};
        }
        case ConstraintSpace::Kind::Full: return {m0 + u.back(), w.front() - w.back()};
    }
    return {0.0, 0.0};
}

}  // namespace momentflow
