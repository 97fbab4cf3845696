#pragma once

#include <gmpxx.h>

#include <initializer_list>
#include <string>
#include <vector>

namespace momentflow {

using Rational = mpq_class;

// Exact conversion: every finite double is a dyadic rational.
Rational to_rational(double value);
double to_double(const Rational& value);

/**
 * Polynomial with exact rational coefficients in the monomial basis,
 * coeffs()[k] multiplies x^k. Trailing zeros are stripped, so the zero
 * polynomial has an empty coefficient list and degree() == -1.
 */
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<Rational> coeffs);
    Polynomial(std::initializer_list<Rational> coeffs);

    static Polynomial constant(const Rational& c);
    static Polynomial monomial(int k, const Rational& c = 1);
    // (1 - x)^n expanded by the binomial theorem.
    static Polynomial one_minus_x_pow(int n);

    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    bool is_zero() const { return coeffs_.empty(); }
    const std::vector<Rational>& coeffs() const { return coeffs_; }
    Rational coeff(int k) const;

    Rational operator()(const Rational& x) const;
    double operator()(double x) const;

    Polynomial derivative() const;
    // Antiderivative with zero constant term.
    Polynomial antiderivative() const;

    Polynomial& operator+=(const Polynomial& other);
    Polynomial& operator-=(const Polynomial& other);
    Polynomial& operator*=(const Rational& s);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, const Rational& s) { return a *= s; }
    friend Polynomial operator*(const Rational& s, Polynomial a) { return a *= s; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator-(Polynomial a) { return a *= Rational(-1); }
    friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.coeffs_ == b.coeffs_; }

    std::string to_string() const;

private:
    void normalize();
    std::vector<Rational> coeffs_;
};

Polynomial poly_integrate(const Polynomial& p);
Rational poly_definite_integral(const Polynomial& p, const Rational& a, const Rational& b);

}  // namespace momentflow
