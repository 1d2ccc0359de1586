/*
   Copyright 2026 The mudkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <mudkit/errors.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

// Special functions needed by the closed-form metrics. Everything here is a
// pure function of its arguments; no global state (std::lgamma writes
// signgam, so log-gamma is computed locally).

namespace mudkit::specfun {

struct Accuracy {
    double rel_tol = 1e-12;
    int max_iter = 10'000;

    void validate() const
    {
        if (!(rel_tol > 0.0))
            throw validation_error("rel_tol", "must be positive");
        if (max_iter < 1)
            throw validation_error("max_iter", "must be at least 1");
    }
};

namespace detail {

// Lanczos approximation, g = 607/128, 15 terms (Godfrey's coefficients).
inline constexpr double lanczos_g = 607.0 / 128.0;
inline constexpr std::array<double, 15> lanczos_coef = {
    0.99999999999999709182,     57.156235665862923517,     -59.597960355475491248,
    14.136097974741747174,      -0.49191381609762019978,   .33994649984811888699e-4,
    .46523628927048575665e-4,   -.98374475304879564677e-4, .15808870322491248884e-3,
    -.21026444172410488319e-3,  .21743961811521264320e-3,  -.16431810653676389022e-3,
    .84418223983852743293e-4,   -.26190838401581408670e-4, .36899182659531622704e-5,
};

inline double log_gamma_lanczos(double x)
{
    // valid for x >= 0.5
    const double xm1 = x - 1.0;
    double sum = lanczos_coef[0];
    for (std::size_t i = 1; i < lanczos_coef.size(); ++i)
        sum += lanczos_coef[i] / (xm1 + static_cast<double>(i));
    const double t = xm1 + lanczos_g + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (xm1 + 0.5) * std::log(t) - t + std::log(sum);
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
inline double beta_continued_fraction(double x, double a, double b, const Accuracy& acc)
{
    constexpr double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny)
        d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= acc.max_iter; ++m) {
        const double md = m;
        const double m2 = 2.0 * md;
        double aa = md * (b - md) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny)
            d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + md) * (qab + md) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny)
            d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) <= acc.rel_tol * 0.1)
            return h;
    }
    throw convergence_error("incomplete_beta: continued fraction did not converge (a=" +
                            std::to_string(a) + ", b=" + std::to_string(b) +
                            ", x=" + std::to_string(x) + ")");
}

inline void check_beta_args(double x, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0))
        throw domain_error("incomplete_beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0))
        throw domain_error("incomplete_beta: x must lie in [0, 1]");
}

inline bool use_symmetric_branch(double x, double a, double b)
{
    return x > (a + 1.0) / (a + b + 2.0);
}

} // namespace detail

/// ln Γ(x) for x > 0.
inline double log_gamma(double x)
{
    if (!(x > 0.0))
        throw domain_error("log_gamma: argument must be positive");
    if (x < 0.5) {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) -
               detail::log_gamma_lanczos(1.0 - x);
    }
    return detail::log_gamma_lanczos(x);
}

inline double log_beta(double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0))
        throw domain_error("beta: arguments must be positive");
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

/// Complete beta function B(a, b) = Γ(a)Γ(b)/Γ(a+b).
inline double beta(double a, double b)
{
    return std::exp(log_beta(a, b));
}

/// Lower, non-regularized incomplete beta ∫₀ˣ y^{a−1}(1−y)^{b−1} dy.
inline double incomplete_beta(double x, double a, double b, const Accuracy& acc = {})
{
    detail::check_beta_args(x, a, b);
    acc.validate();
    if (x == 0.0)
        return 0.0;
    if (x == 1.0)
        return beta(a, b);
    if (!detail::use_symmetric_branch(x, a, b)) {
        const double front = std::exp(a * std::log(x) + b * std::log1p(-x)) / a;
        return front * detail::beta_continued_fraction(x, a, b, acc);
    }
    const double y = 1.0 - x;
    const double front = std::exp(b * std::log(y) + a * std::log(x)) / b;
    return beta(a, b) - front * detail::beta_continued_fraction(y, b, a, acc);
}

/// β(x, a, b) / x^a. Finite where x^a under- or overflows; used by the
/// binomial BER closed form, which carries an explicit x^{−a} factor.
inline double incomplete_beta_over_power(double x, double a, double b, const Accuracy& acc = {})
{
    detail::check_beta_args(x, a, b);
    acc.validate();
    if (x == 0.0)
        return 1.0 / a;
    if (x == 1.0)
        return beta(a, b);
    if (!detail::use_symmetric_branch(x, a, b))
        return std::exp(b * std::log1p(-x)) / a * detail::beta_continued_fraction(x, a, b, acc);
    const double y = 1.0 - x;
    const double whole = std::exp(log_beta(a, b) - a * std::log(x));
    return whole - std::exp(b * std::log(y)) / b * detail::beta_continued_fraction(y, b, a, acc);
}

namespace detail {

/// Plain hypergeometric series Σ (a)_k (b)_k / ((c)_k k!) x^k for |x| < 1.
inline double hyp2f1_series(double a, double b, double c, double x, const Accuracy& acc)
{
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < acc.max_iter; ++k) {
        const double kd = k;
        const double ratio = (a + kd) * (b + kd) / ((c + kd) * (kd + 1.0)) * x;
        term *= ratio;
        sum += term;
        if (term == 0.0)
            return sum;
        // Once the term ratio is below one the remaining tail is bounded by a
        // geometric series with ratio max(|ratio|, |x|).
        const double r = std::max(std::abs(ratio), std::abs(x));
        if (r < 1.0 && std::abs(term) * r / (1.0 - r) <= acc.rel_tol * std::abs(sum))
            return sum;
    }
    throw convergence_error("gauss_2f1: series did not converge within " +
                            std::to_string(acc.max_iter) + " terms");
}

} // namespace detail

/// Gauss hypergeometric ₂F₁(a, b; c; z) for z ≤ 0.
///
/// The argument is mapped into [0, 1) with a Pfaff transformation,
/// ₂F₁(a,b;c;z) = (1−z)^{−b} ₂F₁(c−a, b; c; z/(z−1)), before the series is
/// summed. Because ₂F₁ is symmetric in (a, b) the transformation may be
/// applied on either upper parameter; the one giving an all-positive series
/// with the slower term growth is chosen.
inline double gauss_2f1(double a, double b, double c, double z, const Accuracy& acc = {})
{
    acc.validate();
    if (!(c > 0.0))
        throw domain_error("gauss_2f1: c must be positive");
    if (!(z <= 0.0))
        throw domain_error("gauss_2f1: only z <= 0 is supported");
    if (z == 0.0)
        return 1.0;
    const double w = z / (z - 1.0);
    const double log1mz = std::log1p(-z);

    // transform on b keeps (c−a, b); transform on a keeps (a, c−b)
    const bool on_b_positive = (c - a) >= 0.0 && b >= 0.0;
    const bool on_a_positive = a >= 0.0 && (c - b) >= 0.0;
    bool transform_on_b = true;
    if (on_b_positive && on_a_positive)
        transform_on_b = (a >= b);
    else if (on_a_positive)
        transform_on_b = false;

    if (transform_on_b)
        return std::exp(-b * log1mz) * detail::hyp2f1_series(c - a, b, c, w, acc);
    return std::exp(-a * log1mz) * detail::hyp2f1_series(a, c - b, c, w, acc);
}

/// Gaussian tail probability Q(x) = ½ erfc(x/√2).
inline double q_function(double x)
{
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

} // namespace mudkit::specfun
