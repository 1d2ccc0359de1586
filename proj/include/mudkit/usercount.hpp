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
#include <mudkit/random.hpp>
#include <mudkit/specfun.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace mudkit {

/// Longest Poisson-binomial vector whose PMF is tabulated (O(L²) DP).
inline constexpr std::size_t pb_max_length = 10'000;

/// Additive tolerance for PGF ordering comparisons; PGFs live in [0, 1].
inline constexpr double ordering_tolerance = 1e-10;

enum class CountKind { deterministic, binomial, negative_binomial, poisson, poisson_binomial };

inline const char* to_string(CountKind kind)
{
    switch (kind) {
    case CountKind::deterministic: return "deterministic";
    case CountKind::binomial: return "binomial";
    case CountKind::negative_binomial: return "nb";
    case CountKind::poisson: return "poisson";
    case CountKind::poisson_binomial: return "pb";
    }
    return "?";
}

/// Distribution of the number of active users N = |S|.
///
/// Values are immutable after construction and cheap to copy (the
/// Poisson-binomial PMF table is shared).
class UserCountDistribution {
public:
    struct Deterministic {
        std::uint64_t n;
    };
    /// `trials` may be fractional when the law is parameterized by its mean
    /// (L = λ/p); the PGF and everything derived from it stay valid, but the
    /// PMF and sampling require an integer number of trials.
    struct Binomial {
        double trials;
        double success;
    };
    struct NegBinomial {
        double failures;
        double success;
    };
    struct Poisson {
        double mean;
    };
    struct PoissonBinomial {
        std::shared_ptr<const std::vector<double>> probs;
        std::shared_ptr<const std::vector<double>> pmf;
    };
    using Variant = std::variant<Deterministic, Binomial, NegBinomial, Poisson, PoissonBinomial>;

    static UserCountDistribution deterministic(std::uint64_t n) { return {Deterministic{n}}; }

    static UserCountDistribution binomial(double trials, double success)
    {
        if (!(trials > 0.0) || !std::isfinite(trials))
            throw validation_error("trials", "binomial trials L must be positive, got " + num(trials));
        check_success(success, false);
        return {Binomial{trials, success}};
    }

    /// NB(r, p): number of successes before the r-th failure; r may be real.
    static UserCountDistribution negative_binomial(double failures, double success)
    {
        if (!(failures > 0.0) || !std::isfinite(failures))
            throw validation_error("failures", "NB failures r must be positive, got " + num(failures));
        if (!(success > 0.0 && success < 1.0))
            throw validation_error("success", "NB success p must lie in (0,1), got " + num(success));
        return {NegBinomial{failures, success}};
    }

    static UserCountDistribution poisson(double mean)
    {
        if (!(mean > 0.0) || !std::isfinite(mean))
            throw validation_error("mean", "Poisson mean must be positive, got " + num(mean));
        return {Poisson{mean}};
    }

    static UserCountDistribution poisson_binomial(std::vector<double> probs)
    {
        if (probs.empty())
            throw validation_error("probs", "Poisson-binomial needs at least one probability");
        if (probs.size() > pb_max_length)
            throw validation_error("probs", "Poisson-binomial length L=" + std::to_string(probs.size()) +
                                                " exceeds the PMF limit L <= " +
                                                std::to_string(pb_max_length));
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (!(probs[i] > 0.0 && probs[i] <= 1.0))
                throw validation_error("probs", "entry " + std::to_string(i) +
                                                    " must lie in (0,1], got " + num(probs[i]));
        }
        auto pmf = std::make_shared<std::vector<double>>(probs.size() + 1, 0.0);
        auto& t = *pmf;
        t[0] = 1.0;
        // convolve one Bernoulli at a time, in place from the top down
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const double p = probs[i];
            const double q = 1.0 - p;
            t[i + 1] = t[i] * p;
            for (std::size_t k = i; k > 0; --k)
                t[k] = t[k] * q + t[k - 1] * p;
            t[0] *= q;
        }
        return {PoissonBinomial{std::make_shared<const std::vector<double>>(std::move(probs)),
                                std::move(pmf)}};
    }

    CountKind kind() const { return static_cast<CountKind>(v_.index()); }
    const Variant& variant() const { return v_; }

    template <typename T>
    const T& as() const
    {
        return std::get<T>(v_);
    }

    std::string describe() const
    {
        std::ostringstream os;
        os.precision(12);
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Deterministic>)
                    os << "deterministic(n=" << d.n << ")";
                else if constexpr (std::is_same_v<T, Binomial>)
                    os << "binomial(L=" << d.trials << ",p=" << d.success << ")";
                else if constexpr (std::is_same_v<T, NegBinomial>)
                    os << "nb(r=" << d.failures << ",p=" << d.success << ")";
                else if constexpr (std::is_same_v<T, Poisson>)
                    os << "poisson(lambda=" << d.mean << ")";
                else
                    os << "pb(L=" << d.probs->size() << ")";
            },
            v_);
        return os.str();
    }

private:
    UserCountDistribution(Variant v) : v_(std::move(v)) {}

    static std::string num(double x)
    {
        std::ostringstream os;
        os.precision(12);
        os << x;
        return os.str();
    }

    static void check_success(double p, bool open_right)
    {
        const bool ok = open_right ? (p > 0.0 && p < 1.0) : (p > 0.0 && p <= 1.0);
        if (!ok)
            throw validation_error("success", std::string("success probability p must lie in (0,1") +
                                                  (open_right ? ")" : "]") + ", got " + num(p));
    }

    Variant v_;
};

struct Moments {
    double mean;
    double variance;
};

inline Moments moments(const UserCountDistribution& dist)
{
    using D = UserCountDistribution;
    return std::visit(
        [](const auto& d) -> Moments {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, D::Deterministic>) {
                return {static_cast<double>(d.n), 0.0};
            } else if constexpr (std::is_same_v<T, D::Binomial>) {
                const double lambda = d.trials * d.success;
                return {lambda, lambda * (1.0 - d.success)};
            } else if constexpr (std::is_same_v<T, D::NegBinomial>) {
                const double lambda = d.failures * d.success / (1.0 - d.success);
                return {lambda, lambda / (1.0 - d.success)};
            } else if constexpr (std::is_same_v<T, D::Poisson>) {
                return {d.mean, d.mean};
            } else {
                double mean = 0.0;
                double var = 0.0;
                for (double p : *d.probs) {
                    mean += p;
                    var += p * (1.0 - p);
                }
                return {mean, var};
            }
        },
        dist.variant());
}

inline double mean(const UserCountDistribution& dist) { return moments(dist).mean; }

namespace detail {

inline bool is_integral(double x) { return std::floor(x) == x; }

inline std::uint64_t integral_trials(const UserCountDistribution::Binomial& d, const char* what)
{
    if (!is_integral(d.trials))
        throw domain_error(std::string(what) + ": binomial with fractional trials L=" +
                           std::to_string(d.trials) + " has no PMF");
    return static_cast<std::uint64_t>(d.trials);
}

inline double log_factorial(std::uint64_t k) { return specfun::log_gamma(static_cast<double>(k) + 1.0); }

inline double poisson_pmf(double lambda, std::uint64_t k)
{
    const double kd = static_cast<double>(k);
    return std::exp(kd * std::log(lambda) - lambda - log_factorial(k));
}

} // namespace detail

/// Pr[N = k].
inline double pmf(const UserCountDistribution& dist, std::uint64_t k)
{
    using D = UserCountDistribution;
    return std::visit(
        [k](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            const double kd = static_cast<double>(k);
            if constexpr (std::is_same_v<T, D::Deterministic>) {
                return k == d.n ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, D::Binomial>) {
                const std::uint64_t trials = detail::integral_trials(d, "pmf");
                if (k > trials)
                    return 0.0;
                if (d.success == 1.0)
                    return k == trials ? 1.0 : 0.0;
                const double log_choose = detail::log_factorial(trials) - detail::log_factorial(k) -
                                          detail::log_factorial(trials - k);
                return std::exp(log_choose + kd * std::log(d.success) +
                                (d.trials - kd) * std::log1p(-d.success));
            } else if constexpr (std::is_same_v<T, D::NegBinomial>) {
                const double r = d.failures;
                const double log_coef =
                    specfun::log_gamma(r + kd) - specfun::log_gamma(r) - detail::log_factorial(k);
                return std::exp(log_coef + kd * std::log(d.success) + r * std::log1p(-d.success));
            } else if constexpr (std::is_same_v<T, D::Poisson>) {
                return detail::poisson_pmf(d.mean, k);
            } else {
                return k < d.pmf->size() ? (*d.pmf)[k] : 0.0;
            }
        },
        dist.variant());
}

/// Largest k worth summing: beyond it the remaining mass is below `tail`.
inline std::uint64_t support_bound(const UserCountDistribution& dist, double tail = 1e-16)
{
    using D = UserCountDistribution;
    return std::visit(
        [&](const auto& d) -> std::uint64_t {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, D::Deterministic>) {
                return d.n;
            } else if constexpr (std::is_same_v<T, D::Binomial>) {
                return static_cast<std::uint64_t>(std::ceil(d.trials));
            } else if constexpr (std::is_same_v<T, D::PoissonBinomial>) {
                return d.probs->size();
            } else {
                const Moments m = moments(dist);
                const auto cap = static_cast<std::uint64_t>(m.mean + 60.0 * std::sqrt(m.variance) + 200.0);
                double cum = 0.0;
                for (std::uint64_t k = 0; k < cap; ++k) {
                    cum += pmf(dist, k);
                    if (static_cast<double>(k) > m.mean && 1.0 - cum <= tail)
                        return k;
                }
                return cap;
            }
        },
        dist.variant());
}

/// U_N(z) = E[z^N] in closed form.
inline double pgf(const UserCountDistribution& dist, double z)
{
    using D = UserCountDistribution;
    return std::visit(
        [z](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, D::Deterministic>) {
                return std::pow(z, static_cast<double>(d.n));
            } else if constexpr (std::is_same_v<T, D::Binomial>) {
                return std::pow(1.0 - d.success + d.success * z, d.trials);
            } else if constexpr (std::is_same_v<T, D::NegBinomial>) {
                return std::pow((1.0 - d.success) / (1.0 - d.success * z), d.failures);
            } else if constexpr (std::is_same_v<T, D::Poisson>) {
                return std::exp(d.mean * (z - 1.0));
            } else {
                double prod = 1.0;
                for (double p : *d.probs)
                    prod *= 1.0 - p + p * z;
                return prod;
            }
        },
        dist.variant());
}

/// 1 − U_N(1 − s), evaluated without cancellation for small s.
inline double pgf_complement(const UserCountDistribution& dist, double s)
{
    using D = UserCountDistribution;
    return std::visit(
        [s](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, D::Deterministic>) {
                if (d.n == 0)
                    return 0.0;
                return -std::expm1(static_cast<double>(d.n) * std::log1p(-s));
            } else if constexpr (std::is_same_v<T, D::Binomial>) {
                return -std::expm1(d.trials * std::log1p(-d.success * s));
            } else if constexpr (std::is_same_v<T, D::NegBinomial>) {
                const double u = d.success / (1.0 - d.success);
                return -std::expm1(-d.failures * std::log1p(u * s));
            } else if constexpr (std::is_same_v<T, D::Poisson>) {
                return -std::expm1(-d.mean * s);
            } else {
                double log_prod = 0.0;
                for (double p : *d.probs)
                    log_prod += std::log1p(-p * s);
                return -std::expm1(log_prod);
            }
        },
        dist.variant());
}

/// U_N'(1 − s), the PGF derivative at z = 1 − s.
inline double pgf_derivative_complement(const UserCountDistribution& dist, double s)
{
    using D = UserCountDistribution;
    return std::visit(
        [s](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, D::Deterministic>) {
                if (d.n == 0)
                    return 0.0;
                const double n = static_cast<double>(d.n);
                return n * std::exp((n - 1.0) * std::log1p(-s));
            } else if constexpr (std::is_same_v<T, D::Binomial>) {
                const double lambda = d.trials * d.success;
                return lambda * std::exp((d.trials - 1.0) * std::log1p(-d.success * s));
            } else if constexpr (std::is_same_v<T, D::NegBinomial>) {
                const double u = d.success / (1.0 - d.success);
                return d.failures * u * std::exp(-(1.0 + d.failures) * std::log1p(u * s));
            } else if constexpr (std::is_same_v<T, D::Poisson>) {
                return d.mean * std::exp(-d.mean * s);
            } else {
                // Σ_i p_i Π_{j≠i} (1 − p_j s), guarding factors that vanish
                double log_prod = 0.0;
                double ratio_sum = 0.0;
                std::size_t zeros = 0;
                double zero_weight = 0.0;
                for (double p : *d.probs) {
                    const double f = 1.0 - p * s;
                    if (f <= 0.0) {
                        ++zeros;
                        zero_weight = p;
                        continue;
                    }
                    log_prod += std::log(f);
                    ratio_sum += p / f;
                }
                if (zeros >= 2)
                    return 0.0;
                if (zeros == 1)
                    return zero_weight * std::exp(log_prod);
                return std::exp(log_prod) * ratio_sum;
            }
        },
        dist.variant());
}

/// Draw N. The stream must be owned by the caller.
template <typename URBG>
std::uint64_t sample(const UserCountDistribution& dist, URBG& rng)
{
    using D = UserCountDistribution;
    return std::visit(
        [&rng](const auto& d) -> std::uint64_t {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, D::Deterministic>) {
                return d.n;
            } else if constexpr (std::is_same_v<T, D::Binomial>) {
                const std::uint64_t trials = detail::integral_trials(d, "sample");
                std::binomial_distribution<std::uint64_t> draw(trials, d.success);
                return draw(rng);
            } else if constexpr (std::is_same_v<T, D::NegBinomial>) {
                // Gamma–Poisson mixture: Λ ~ Gamma(shape r, scale p/(1−p))
                std::gamma_distribution<double> rate(d.failures, d.success / (1.0 - d.success));
                const double intensity = rate(rng);
                if (!(intensity > 0.0))
                    return 0;
                std::poisson_distribution<std::uint64_t> draw(intensity);
                return draw(rng);
            } else if constexpr (std::is_same_v<T, D::Poisson>) {
                std::poisson_distribution<std::uint64_t> draw(d.mean);
                return draw(rng);
            } else {
                std::uint64_t n = 0;
                for (double p : *d.probs)
                    n += uniform01(rng) < p ? 1 : 0;
                return n;
            }
        },
        dist.variant());
}

struct PgfBounds {
    double lower;
    double upper;
};

/// Moment bounds on the PGF: 1+(z−1)λ ≤ U(z) ≤ 1+(z−1)λ + ½(z−1)²(σ²+λ²−λ).
inline PgfBounds pgf_bounds(const UserCountDistribution& dist, double z)
{
    const Moments m = moments(dist);
    const double lower = 1.0 + (z - 1.0) * m.mean;
    const double factorial_moment = m.variance + m.mean * m.mean - m.mean;
    return {lower, lower + 0.5 * (z - 1.0) * (z - 1.0) * factorial_moment};
}

namespace detail {

inline void check_probs(std::span<const double> probs)
{
    if (probs.empty())
        throw validation_error("probs", "need at least one probability");
    for (double p : probs) {
        if (!(p > 0.0 && p <= 1.0))
            throw validation_error("probs", "entries must lie in (0,1]");
    }
}

} // namespace detail

/// Le Cam's bound 2 Σ p_i² on the L1 distance between PB and Poisson laws.
inline double lecam_bound(std::span<const double> probs)
{
    detail::check_probs(probs);
    double s = 0.0;
    for (double p : probs)
        s += p * p;
    return 2.0 * s;
}

/// Exact Σ_k |Pr[W=k] − Poisson(λ; k)| with λ = Σ p_i.
inline double pb_poisson_l1_distance(std::span<const double> probs)
{
    detail::check_probs(probs);
    const auto pb = UserCountDistribution::poisson_binomial({probs.begin(), probs.end()});
    const auto& table = *pb.as<UserCountDistribution::PoissonBinomial>().pmf;
    const double lambda = mean(pb);
    double distance = 0.0;
    double poisson_mass = 0.0;
    for (std::uint64_t k = 0; k < table.size(); ++k) {
        const double q = detail::poisson_pmf(lambda, k);
        poisson_mass += q;
        distance += std::abs(table[k] - q);
    }
    // PB has no mass above L, so the rest is the Poisson tail; sum it term by
    // term until the cumulative mass exceeds 1 − 1e−12 and past the mode.
    double tail = 0.0;
    for (std::uint64_t k = table.size(); poisson_mass + tail < 1.0 - 1e-12 ||
                                         static_cast<double>(k) < lambda + 1.0;
         ++k) {
        const double q = detail::poisson_pmf(lambda, k);
        if (q == 0.0 && static_cast<double>(k) > lambda)
            break;
        tail += q;
    }
    const double rest = std::max(0.0, 1.0 - poisson_mass - tail);
    return distance + tail + rest;
}

struct OrderingVerdict {
    bool holds = true;
    double max_violation = 0.0;
    std::optional<double> witness_z;
};

/// A ≤_Lt B  ⇔  U_A(z) ≥ U_B(z) on [0, 1], checked on a uniform grid.
inline OrderingVerdict lt_order_check(const UserCountDistribution& a, const UserCountDistribution& b,
                                      std::size_t grid_size = 1001)
{
    if (grid_size < 2)
        throw validation_error("grid_size", "need at least 2 grid points");
    double worst = 0.0;
    double worst_z = 0.0;
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double z = static_cast<double>(i) / static_cast<double>(grid_size - 1);
        const double diff = pgf(a, z) - pgf(b, z);
        if (-diff > worst) {
            worst = -diff;
            worst_z = z;
        }
    }
    OrderingVerdict v;
    v.max_violation = worst;
    v.holds = worst <= ordering_tolerance;
    if (!v.holds)
        v.witness_z = worst_z;
    return v;
}

/// a ≺ b: sorted-descending partial sums of a never exceed those of b.
inline bool majorization_less(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw validation_error("length", "majorization needs vectors of equal length");
    const double sa = std::accumulate(a.begin(), a.end(), 0.0);
    const double sb = std::accumulate(b.begin(), b.end(), 0.0);
    if (std::abs(sa - sb) > 1e-12)
        throw validation_error("sum", "majorization needs vectors with equal sums");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end(), std::greater<>());
    std::sort(y.begin(), y.end(), std::greater<>());
    double px = 0.0;
    double py = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        px += x[i];
        py += y[i];
        if (px > py + 1e-12)
            return false;
    }
    return true;
}

/// L activity probabilities with mean λ/L each, spread linearly by ±spread
/// (relative) from the first user to the last.
inline std::vector<double> spread_probabilities(std::size_t length, double lambda, double spread)
{
    if (length < 1)
        throw validation_error("L", "need at least one user");
    if (!(lambda > 0.0))
        throw validation_error("lambda", "mean must be positive");
    if (!(spread >= 0.0 && spread < 1.0))
        throw validation_error("spread", "PB spread must lie in [0,1)");
    const double base = lambda / static_cast<double>(length);
    std::vector<double> probs(length, base);
    if (length > 1) {
        for (std::size_t i = 0; i < length; ++i) {
            const double t = 2.0 * static_cast<double>(i) / static_cast<double>(length - 1) - 1.0;
            probs[i] = base * (1.0 + spread * t);
        }
    }
    if (probs.back() > 1.0)
        throw validation_error("spread", "PB entries exceed 1 at L=" + std::to_string(length) +
                                             ", lambda=" + std::to_string(lambda));
    return probs;
}

/// A one-parameter family of count laws indexed by the mean λ.
struct CountFamily {
    CountKind kind = CountKind::poisson;
    /// binomial/NB success probability, or the average PB entry
    double success = 0.5;
    /// PB only: entries are spread linearly by ±spread around λ/L
    double spread = 0.0;

    UserCountDistribution at(double lambda) const
    {
        if (!(lambda > 0.0))
            throw validation_error("lambda", "family mean must be positive");
        switch (kind) {
        case CountKind::deterministic: {
            const double n = std::round(lambda);
            if (std::abs(n - lambda) > 1e-9 * std::max(1.0, lambda))
                throw validation_error("lambda", "deterministic family needs an integer mean");
            return UserCountDistribution::deterministic(static_cast<std::uint64_t>(n));
        }
        case CountKind::binomial:
            return UserCountDistribution::binomial(snap(lambda / success), success);
        case CountKind::negative_binomial:
            return UserCountDistribution::negative_binomial(lambda * (1.0 - success) / success, success);
        case CountKind::poisson:
            return UserCountDistribution::poisson(lambda);
        case CountKind::poisson_binomial:
            return UserCountDistribution::poisson_binomial(spread_probs(lambda));
        }
        throw validation_error("kind", "unknown family");
    }

    std::vector<double> spread_probs(double lambda) const
    {
        if (!(success > 0.0 && success <= 1.0))
            throw validation_error("success", "PB family average entry must lie in (0,1]");
        const auto length = static_cast<std::size_t>(std::max(1.0, std::round(lambda / success)));
        return spread_probabilities(length, lambda, spread);
    }

private:
    // λ/p computed in floating point may miss an integer by an ulp
    static double snap(double trials)
    {
        const double r = std::round(trials);
        return std::abs(r - trials) <= 1e-9 * std::max(1.0, trials) ? r : trials;
    }
};

struct ScalingConditionRow {
    double lambda;
    /// Pr[N = 0] · ln ln λ  (condition (a) asks this to vanish)
    double empty_mass_loglog;
    /// σ² / λ²  (condition (b) asks this to vanish)
    double relative_variance;
};

/// Scaling-law conditions for one count law; its mean must be >= 3.
inline ScalingConditionRow scaling_condition(const UserCountDistribution& dist)
{
    const Moments m = moments(dist);
    if (!(m.mean >= 3.0))
        throw validation_error("lambda", "scaling conditions need a mean >= 3 so that ln ln λ > 0");
    return {m.mean, pgf(dist, 0.0) * std::log(std::log(m.mean)), m.variance / (m.mean * m.mean)};
}

inline std::vector<ScalingConditionRow> scaling_conditions(const CountFamily& family,
                                                           std::span<const double> lambda_grid)
{
    std::vector<ScalingConditionRow> rows;
    double prev = 0.0;
    for (double lambda : lambda_grid) {
        if (!(lambda >= 3.0))
            throw validation_error("lambda_grid", "every mean must be >= 3 so that ln ln λ > 0");
        if (!rows.empty() && !(lambda > prev))
            throw validation_error("lambda_grid", "means must be strictly increasing");
        prev = lambda;
        ScalingConditionRow row = scaling_condition(family.at(lambda));
        row.lambda = lambda;
        rows.push_back(row);
    }
    return rows;
}

} // namespace mudkit
