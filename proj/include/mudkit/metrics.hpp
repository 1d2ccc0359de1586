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

#include <mudkit/channel.hpp>
#include <mudkit/errors.hpp>
#include <mudkit/quadrature.hpp>
#include <mudkit/specfun.hpp>
#include <mudkit/usercount.hpp>

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Analytic link metrics for best-user selection over a random number of
// active users. Capacities are in nats. Every semi-infinite integral over the
// gain x is computed after the substitution y = e^{−x}, so 1 − F_γ*(x)
// becomes 1 − U_N(1 − y) and the selected-gain density becomes U_N'(1 − y).

namespace mudkit {

enum class BerModel { exponential, q_form };
enum class RateUnits { bits, nats };
enum class Method { closed_form, quadrature, monte_carlo };

inline const char* to_string(BerModel m) { return m == BerModel::exponential ? "exponential" : "q"; }
inline const char* to_string(RateUnits u) { return u == RateUnits::bits ? "bits" : "nats"; }
inline const char* to_string(Method m)
{
    switch (m) {
    case Method::closed_form: return "closed_form";
    case Method::quadrature: return "quadrature";
    case Method::monte_carlo: return "monte_carlo";
    }
    return "?";
}

/// Instantaneous error rate P_e(ρx): α e^{−ηρx} or α Q(√(ηρx)).
struct ErrorRateModel {
    BerModel kind = BerModel::exponential;
    double alpha = 0.5;
    double eta = 1.0;

    double at(double inst_snr) const
    {
        if (kind == BerModel::exponential)
            return alpha * std::exp(-eta * inst_snr);
        return alpha * specfun::q_function(std::sqrt(eta * inst_snr));
    }

    /// P_e(−ρ ln y), i.e. the error rate at gain x = −ln y.
    double at_survival(double rho, double y) const
    {
        if (kind == BerModel::exponential)
            return alpha * std::pow(y, eta * rho);
        return alpha * specfun::q_function(std::sqrt(-eta * rho * std::log(y)));
    }

    double at_zero() const { return kind == BerModel::exponential ? alpha : 0.5 * alpha; }
};

struct Scenario {
    UserCountDistribution count = UserCountDistribution::poisson(1.0);
    double snr = 10.0;
    double rate = 1.0;
    RateUnits rate_units = RateUnits::bits;
    double ber_alpha = 0.5;
    double ber_eta = 1.0;
    BerModel ber_model = BerModel::exponential;

    void validate() const
    {
        if (!(snr > 0.0) || !std::isfinite(snr))
            throw validation_error("snr", "average SNR rho must be positive");
        if (!(rate > 0.0) || !std::isfinite(rate))
            throw validation_error("rate", "target rate R must be positive");
        if (!(ber_alpha > 0.0 && ber_alpha <= 1.0))
            throw validation_error("alpha", "BER prefactor alpha must lie in (0,1]");
        if (!(ber_eta > 0.0) || !std::isfinite(ber_eta))
            throw validation_error("eta", "BER exponent eta must be positive");
    }

    ErrorRateModel error_model() const { return {ber_model, ber_alpha, ber_eta}; }
};

struct MetricEstimate {
    double value = 0.0;
    Method method = Method::quadrature;
    std::optional<double> std_err;
};

namespace detail {

inline quad::Options quad_options(double tol)
{
    if (!(tol > 0.0))
        throw validation_error("tol", "relative tolerance must be positive");
    quad::Options o;
    o.rel_tol = tol;
    return o;
}

/// ρ ∫₀¹ c(y) / ((1 − ρ ln y) y) dy where c(y) = 1 − F_γ*(−ln y).
template <typename Complement>
double capacity_integral(double rho, const Complement& complement, double tol)
{
    auto integrand = [&](double y) {
        return rho * complement(y) / ((1.0 - rho * std::log(y)) * y);
    };
    return quad::integrate(integrand, 0.0, 1.0, quad_options(tol)).value;
}

/// ∫₀¹ P_e(−ρ ln y) g(y) dy where g(y) = U'(1 − y) is the density in y.
template <typename Density>
double ber_integral(const ErrorRateModel& pe, double rho, const Density& density, double tol)
{
    auto integrand = [&](double y) { return pe.at_survival(rho, y) * density(y); };
    return quad::integrate(integrand, 0.0, 1.0, quad_options(tol)).value;
}

// 1 − (1 − s)^n and n (1 − s)^{n−1} for real n; these are the same
// expressions the deterministic count uses, so a deterministic N of mean
// n reproduces these values bit for bit.
inline double fixed_users_complement(double n, double s) { return -std::expm1(n * std::log1p(-s)); }
inline double fixed_users_density(double n, double s) { return n * std::exp((n - 1.0) * std::log1p(-s)); }

inline void check_rho(double rho)
{
    if (!(rho > 0.0) || !std::isfinite(rho))
        throw validation_error("snr", "average SNR rho must be positive");
}

} // namespace detail

/// Gain threshold below which the link is in outage: (2^R − 1)/ρ for R in
/// bits, (e^R − 1)/ρ for R in nats.
inline double outage_gain_threshold(const Scenario& s)
{
    const double scale = s.rate_units == RateUnits::bits ? std::numbers::ln2 : 1.0;
    return std::expm1(s.rate * scale) / s.snr;
}

/// P_out = U_N(F_γ(τ)).
inline double outage_probability(const Scenario& s)
{
    s.validate();
    return pgf(s.count, rayleigh_gain_cdf(outage_gain_threshold(s)));
}

/// E_N[C̄(ρ, N)] = ρ ∫₀^∞ (1 − U_N(F(x)))/(1 + ρx) dx, in nats.
inline MetricEstimate ergodic_capacity(const Scenario& s, double tol = quad::default_rel_tol)
{
    s.validate();
    const auto& count = s.count;
    const double v = detail::capacity_integral(
        s.snr, [&](double y) { return pgf_complement(count, y); }, tol);
    return {v, Method::quadrature, std::nullopt};
}

/// C̄(ρ, n) for a fixed, possibly non-integer, number of users n (F^n).
inline double capacity_fixed_users(double rho, double n, double tol = quad::default_rel_tol)
{
    detail::check_rho(rho);
    if (!(n >= 0.0))
        throw validation_error("n", "number of users must be non-negative");
    if (n == 0.0)
        return 0.0;
    return detail::capacity_integral(
        rho, [n](double y) { return detail::fixed_users_complement(n, y); }, tol);
}

/// Closed-form binomial BER α p^{−1−ηρ} λ β(p, 1+ηρ, λ/p): the continuous
/// part only (the Pr[N=0] atom is not included).
inline double ber_closed_binomial(double lambda, double p, double alpha, double eta, double rho)
{
    if (!(p > 0.0 && p <= 1.0))
        throw validation_error("success", "p must lie in (0,1]");
    if (!(lambda > 0.0) || !(lambda / p >= 1.0))
        throw validation_error("lambda", "need lambda/p >= 1 (at least one trial)");
    const double a = 1.0 + eta * rho;
    // p^{−a} β(p, a, b) is evaluated as one scaled quantity
    return alpha * lambda * specfun::incomplete_beta_over_power(p, a, lambda / p);
}

/// Closed-form NB BER (ruα/(1+ηρ)) ₂F₁(1+r, 1+ηρ; 2+ηρ; −u), u = p/(1−p),
/// continuous part only.
inline double ber_closed_negbinomial(double r, double p, double alpha, double eta, double rho)
{
    if (!(r > 0.0))
        throw validation_error("failures", "r must be positive");
    if (!(p > 0.0 && p < 1.0))
        throw validation_error("success", "p must lie in (0,1)");
    const double u = p / (1.0 - p);
    const double er = eta * rho;
    return r * u * alpha / (1.0 + er) * specfun::gauss_2f1(1.0 + r, 1.0 + er, 2.0 + er, -u);
}

/// Closed-form BER where one exists (exponential error model with
/// binomial, NB or deterministic counts); `include_empty_atom` adds
/// P_e(0)·Pr[N=0].
inline std::optional<double> ber_closed_form(const Scenario& s, bool include_empty_atom = false)
{
    s.validate();
    if (s.ber_model != BerModel::exponential)
        return std::nullopt;
    using D = UserCountDistribution;
    std::optional<double> v;
    switch (s.count.kind()) {
    case CountKind::binomial: {
        const auto& b = s.count.as<D::Binomial>();
        if (b.trials < 1.0)
            return std::nullopt;
        v = ber_closed_binomial(b.trials * b.success, b.success, s.ber_alpha, s.ber_eta, s.snr);
        break;
    }
    case CountKind::negative_binomial: {
        const auto& nb = s.count.as<D::NegBinomial>();
        v = ber_closed_negbinomial(nb.failures, nb.success, s.ber_alpha, s.ber_eta, s.snr);
        break;
    }
    case CountKind::deterministic: {
        const auto n = s.count.as<D::Deterministic>().n;
        v = n == 0 ? 0.0
                   : s.ber_alpha * static_cast<double>(n) *
                         specfun::beta(1.0 + s.ber_eta * s.snr, static_cast<double>(n));
        break;
    }
    default:
        return std::nullopt;
    }
    if (include_empty_atom)
        *v += s.error_model().at_zero() * pgf(s.count, 0.0);
    return v;
}

/// ∫ P_e(ρx) dF_γ*(x) by quadrature against the continuous density, plus
/// P_e(0)·Pr[N=0] when `include_empty_atom` is set.
inline MetricEstimate ber_numeric(const Scenario& s, double tol = quad::default_rel_tol,
                                  bool include_empty_atom = false)
{
    s.validate();
    const auto& count = s.count;
    const ErrorRateModel pe = s.error_model();
    double v = detail::ber_integral(
        pe, s.snr, [&](double y) { return pgf_derivative_complement(count, y); }, tol);
    if (include_empty_atom)
        v += pe.at_zero() * pgf(count, 0.0);
    return {v, Method::quadrature, std::nullopt};
}

/// P̄e(ρ, n) for a fixed, possibly non-integer, number of users n ≥ 0.
inline double ber_fixed_users(const ErrorRateModel& pe, double rho, double n,
                              double tol = quad::default_rel_tol)
{
    detail::check_rho(rho);
    if (!(n >= 0.0))
        throw validation_error("n", "number of users must be non-negative");
    if (n == 0.0)
        return pe.at_zero();
    return detail::ber_integral(
        pe, rho, [n](double y) { return detail::fixed_users_density(n, y); }, tol);
}

struct JensenGaps {
    /// C̄(ρ, λ) − E_N[C̄(ρ, N)]
    double cap_gap;
    /// E_N[P̄e(ρ, N)] − P̄e(ρ, λ), with the empty-set atom in the expectation
    double ber_gap;
    double cap_fixed;
    double cap_random;
    double ber_fixed;
    double ber_random;
};

/// Cost of randomizing the number of users, relative to a fixed λ = E[N].
inline JensenGaps jensen_gaps(const Scenario& s, double tol = quad::default_rel_tol)
{
    s.validate();
    const double lambda = mean(s.count);
    if (!(lambda > 0.0))
        throw validation_error("count", "Jensen gaps need a positive mean number of users");
    const double t = std::min(tol, 1e-12);
    const double cap_random = ergodic_capacity(s, t).value;
    const double cap_fixed = capacity_fixed_users(s.snr, lambda, t);
    const double ber_random = ber_numeric(s, t, true).value;
    const double ber_fixed = ber_fixed_users(s.error_model(), s.snr, lambda, t);
    return {cap_fixed - cap_random, ber_random - ber_fixed, cap_fixed, cap_random, ber_fixed, ber_random};
}

struct TightnessRow {
    double lambda;
    double ber_random;
    double ber_fixed;
    /// (E_N[P̄e] − P̄e(ρ, λ)) · λ / P̄e(ρ, λ)
    double normalized_residual;
};

/// Jensen residual for a count family as its mean grows (Poisson by default).
inline std::vector<TightnessRow> jensen_tightness_diagnostic(double rho, const ErrorRateModel& pe,
                                                             std::span<const double> lambda_grid,
                                                             const CountFamily& family = {},
                                                             double tol = quad::default_rel_tol)
{
    detail::check_rho(rho);
    std::vector<TightnessRow> rows;
    double prev = 0.0;
    for (double lambda : lambda_grid) {
        if (!(lambda >= 1.0))
            throw validation_error("lambda_grid", "means must be >= 1");
        if (!rows.empty() && !(lambda > prev))
            throw validation_error("lambda_grid", "means must be strictly increasing");
        prev = lambda;
        Scenario s;
        s.count = family.at(lambda);
        s.snr = rho;
        s.ber_alpha = pe.alpha;
        s.ber_eta = pe.eta;
        s.ber_model = pe.kind;
        const double random = ber_numeric(s, tol, true).value;
        const double fixed = ber_fixed_users(pe, rho, lambda, tol);
        rows.push_back({lambda, random, fixed, (random - fixed) * lambda / fixed});
    }
    return rows;
}

struct ScalingGapRow {
    double lambda;
    double capacity;
    /// E[C̄] − ln(1 + ρ ln λ)
    double gap;
    /// gap · √(ln λ)
    double normalized;
};

/// One row of the scaling table for a single count law with mean λ ≥ 3.
inline ScalingGapRow scaling_gap_at(const UserCountDistribution& count, double rho,
                                    double tol = quad::default_rel_tol)
{
    detail::check_rho(rho);
    const double lambda = mean(count);
    if (!(lambda >= 3.0))
        throw validation_error("lambda", "scaling gap needs a mean >= 3");
    Scenario s;
    s.count = count;
    s.snr = rho;
    const double c = ergodic_capacity(s, tol).value;
    const double gap = c - std::log1p(rho * std::log(lambda));
    return {lambda, c, gap, gap * std::sqrt(std::log(lambda))};
}

inline std::vector<ScalingGapRow> capacity_scaling_gap(const CountFamily& family, double rho,
                                                       std::span<const double> lambda_grid,
                                                       double tol = quad::default_rel_tol)
{
    std::vector<ScalingGapRow> rows;
    double prev = 0.0;
    for (double lambda : lambda_grid) {
        if (!(lambda >= 3.0))
            throw validation_error("lambda_grid", "every mean must be >= 3");
        if (!rows.empty() && !(lambda > prev))
            throw validation_error("lambda_grid", "means must be strictly increasing");
        prev = lambda;
        ScalingGapRow row = scaling_gap_at(family.at(lambda), rho, tol);
        row.lambda = lambda;
        rows.push_back(row);
    }
    return rows;
}

struct PoissonGap {
    /// |E_W[C̄] − E_N[C̄]|, W Poisson-binomial, N Poisson of equal mean
    double gap;
    double capacity_pb;
    double capacity_poisson;
    /// ln ln L · Σ p_i² (trend witness; defined for L ≥ 3)
    std::optional<double> bound_witness;
};

inline PoissonGap capacity_gap_pb_poisson(std::span<const double> probs, double rho,
                                          double tol = quad::default_rel_tol)
{
    detail::check_rho(rho);
    Scenario s;
    s.snr = rho;
    s.count = UserCountDistribution::poisson_binomial({probs.begin(), probs.end()});
    const double lambda = mean(s.count);
    const double t = std::min(tol, 1e-12);
    const double c_pb = ergodic_capacity(s, t).value;
    s.count = UserCountDistribution::poisson(lambda);
    const double c_pois = ergodic_capacity(s, t).value;
    PoissonGap out{std::abs(c_pb - c_pois), c_pb, c_pois, std::nullopt};
    if (probs.size() >= 3) {
        double sq = 0.0;
        for (double p : probs)
            sq += p * p;
        out.bound_witness = std::log(std::log(static_cast<double>(probs.size()))) * sq;
    }
    return out;
}

struct RegVarEstimate {
    /// limit of log_κ(t(κu)/t(u)) as u → 0, extrapolated from the grid
    double exponent;
    /// the ratio exponent at the smallest grid point, without extrapolation
    double raw_at_smallest;
    std::vector<double> per_point;
    /// ηρ − 1 (exponential model) or ηρ/2 − 1 (Q model)
    double expected;
};

namespace detail {

/// ln t(u) up to an additive constant, for unit-exponential gains.
inline double log_regvar_kernel(BerModel model, double eta_rho, double u)
{
    const double log_one_minus = std::log(-std::expm1(-u)); // ln(1 − e^{−u}), stable for tiny u
    if (model == BerModel::exponential)
        return (eta_rho - 1.0) * log_one_minus - u;
    const double x0 = -log_one_minus; // F⁻¹(e^{−u})
    return (0.5 * eta_rho - 1.0) * log_one_minus - u - 0.5 * std::log(x0);
}

} // namespace detail

/// Regular-variation exponent of t(u) = ρ B(ρx₀) e^{−u} / f(x₀), x₀ = F⁻¹(e^{−u}),
/// at u = 0, where B = −dP_e/dx and F is the unit-exponential CDF.
inline RegVarEstimate regvar_exponent(BerModel model, double rho, double eta, std::span<const double> u_grid,
                                      double kappa)
{
    detail::check_rho(rho);
    if (!(eta > 0.0))
        throw validation_error("eta", "must be positive");
    if (!(kappa > 0.0) || kappa == 1.0)
        throw validation_error("kappa", "must be positive and different from 1");
    if (u_grid.empty())
        throw validation_error("u_grid", "need at least one point");
    constexpr double underflow_guard = 1e-250;
    double prev = 1.0;
    for (double u : u_grid) {
        if (!(u > 0.0 && u <= 0.1))
            throw validation_error("u_grid", "points must lie in (0, 0.1]");
        if (!(u < prev) && u != u_grid.front())
            throw validation_error("u_grid", "points must decrease toward 0");
        if (u < underflow_guard || kappa * u < underflow_guard)
            throw domain_error("regvar_exponent: u too small, t(u) would underflow");
        prev = u;
    }
    const double eta_rho = eta * rho;
    RegVarEstimate out;
    out.expected = model == BerModel::exponential ? eta_rho - 1.0 : 0.5 * eta_rho - 1.0;
    for (double u : u_grid) {
        const double e = (detail::log_regvar_kernel(model, eta_rho, kappa * u) -
                          detail::log_regvar_kernel(model, eta_rho, u)) /
                         std::log(kappa);
        out.per_point.push_back(e);
    }
    out.raw_at_smallest = out.per_point.back();
    out.exponent = out.raw_at_smallest;

    // A slowly varying factor of the form (ln 1/u)^c shifts the ratio by
    // c·g(u), g(u) = log_κ(ln(1/(κu)) / ln(1/u)), which decays only like
    // 1/ln(1/u). Fit (exponent, c) through the two smallest grid points.
    const std::size_t m = u_grid.size();
    if (m >= 2) {
        auto g = [&](double u) { return std::log(std::log(1.0 / (kappa * u)) / std::log(1.0 / u)) / std::log(kappa); };
        const double u1 = u_grid[m - 2];
        const double u2 = u_grid[m - 1];
        if (kappa * u1 < 0.5) {
            const double g1 = g(u1);
            const double g2 = g(u2);
            const double c = (out.per_point[m - 2] - out.per_point[m - 1]) / (g1 - g2);
            out.exponent = out.per_point[m - 1] - c * g2;
        }
    }
    return out;
}

} // namespace mudkit
