#include "momentflow/polynomial.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace momentflow {

Rational to_rational(double value) {
    if (!std::isfinite(value)) {
        throw std::invalid_argument("to_rational: non-finite value");
    }
    Rational r(value);
    r.canonicalize();
    return r;
}

double to_double(const Rational& value) { return value.get_d(); }

Polynomial::Polynomial(std::vector<Rational> coeffs) : coeffs_(std::move(coeffs)) { normalize(); }

Polynomial::Polynomial(std::initializer_list<Rational> coeffs) : coeffs_(coeffs) { normalize(); }

Polynomial Polynomial::constant(const Rational& c) { return Polynomial({c}); }

Polynomial Polynomial::monomial(int k, const Rational& c) {
    if (k < 0) throw std::invalid_argument("Polynomial::monomial: negative degree");
    std::vector<Rational> cs(static_cast<std::size_t>(k) + 1, Rational(0));
    cs.back() = c;
    return Polynomial(std::move(cs));
}

Polynomial Polynomial::one_minus_x_pow(int n) {
    if (n < 0) throw std::invalid_argument("Polynomial::one_minus_x_pow: negative exponent");
    std::vector<Rational> cs(static_cast<std::size_t>(n) + 1);
    mpz_class binom = 1;
    for (int k = 0; k <= n; ++k) {
        cs[k] = (k % 2 == 0) ? Rational(binom) : Rational(-binom);
        binom = binom * (n - k) / (k + 1);
    }
    return Polynomial(std::move(cs));
}

Rational Polynomial::coeff(int k) const {
    if (k < 0 || k > degree()) return 0;
    return coeffs_[k];
}

Rational Polynomial::operator()(const Rational& x) const {
    Rational acc = 0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
        acc = acc * x + *it;
    }
    return acc;
}

double Polynomial::operator()(double x) const { return to_double((*this)(to_rational(x))); }

Polynomial Polynomial::derivative() const {
    if (coeffs_.size() <= 1) return {};
    std::vector<Rational> cs(coeffs_.size() - 1);
    for (std::size_t k = 1; k < coeffs_.size(); ++k) cs[k - 1] = coeffs_[k] * static_cast<long>(k);
    return Polynomial(std::move(cs));
}

Polynomial Polynomial::antiderivative() const {
    if (coeffs_.empty()) return {};
    std::vector<Rational> cs(coeffs_.size() + 1, Rational(0));
    for (std::size_t k = 0; k < coeffs_.size(); ++k) cs[k + 1] = coeffs_[k] / static_cast<long>(k + 1);
    return Polynomial(std::move(cs));
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    if (other.coeffs_.size() > coeffs_.size()) coeffs_.resize(other.coeffs_.size(), Rational(0));
    for (std::size_t k = 0; k < other.coeffs_.size(); ++k) coeffs_[k] += other.coeffs_[k];
    normalize();
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
    if (other.coeffs_.size() > coeffs_.size()) coeffs_.resize(other.coeffs_.size(), Rational(0));
    for (std::size_t k = 0; k < other.coeffs_.size(); ++k) coeffs_[k] -= other.coeffs_[k];
    normalize();
    return *this;
}

Polynomial& Polynomial::operator*=(const Rational& s) {
    for (auto& c : coeffs_) c *= s;
    normalize();
    return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<Rational> cs(a.coeffs_.size() + b.coeffs_.size() - 1, Rational(0));
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
        for (std::size_t j = 0; j < b.coeffs_.size(); ++j) cs[i + j] += a.coeffs_[i] * b.coeffs_[j];
    return Polynomial(std::move(cs));
}

std::string Polynomial::to_string() const {
    if (coeffs_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (std::size_t k = 0; k < coeffs_.size(); ++k) {
        if (coeffs_[k] == 0) continue;
        if (!first) os << " + ";
        os << "(" << coeffs_[k].get_str() << ")";
        if (k >= 1) os << "*x";
        if (k >= 2) os << "^" << k;
        first = false;
    }
    return os.str();
}

void Polynomial::normalize() {
    for (auto& c : coeffs_) c.canonicalize();
    while (!coeffs_.empty() && coeffs_.back() == 0) coeffs_.pop_back();
}

Polynomial poly_integrate(const Polynomial& p) { return p.antiderivative(); }

Rational poly_definite_integral(const Polynomial& p, const Rational& a, const Rational& b) {
    Polynomial primitive = p.antiderivative();
    return primitive(b) - primitive(a);
}

}  // namespace momentflow
