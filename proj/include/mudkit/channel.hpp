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
#include <mudkit/usercount.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace mudkit {

/// Single-user channel gain law. Only unit-mean Rayleigh fading (exponential
/// power gain) is supported; every closed form downstream assumes it.
class FadingLaw {
public:
    enum class Kind { rayleigh_unit_mean };

    FadingLaw() = default;

    static FadingLaw from_name(const std::string& name)
    {
        if (name == "rayleigh")
            return {};
        throw validation_error("fading", "unsupported fading law '" + name + "' (only rayleigh)");
    }

    Kind kind() const { return Kind::rayleigh_unit_mean; }

    double cdf(double x) const { return -std::expm1(-x); }
    double survival(double x) const { return std::exp(-x); }
    double pdf(double x) const { return std::exp(-x); }
    /// x with survival(x) = s
    double inverse_survival(double s) const { return -std::log(s); }

    template <typename URBG>
    double sample(URBG& rng) const
    {
        return unit_exponential(rng);
    }
};

inline double rayleigh_gain_cdf(double x)
{
    if (!(x >= 0.0))
        throw domain_error("rayleigh_gain_cdf: gain must be non-negative");
    return -std::expm1(-x);
}

/// Probability that a unit-mean Rayleigh interference gain stays below Q.
inline double success_prob(double threshold)
{
    if (!(threshold >= 0.0))
        throw domain_error("success_prob: threshold Q must be non-negative");
    return -std::expm1(-threshold);
}

/// Law of the best active user's gain, F(x) = U_N(F_γ(x)). When no user is
/// active the selected gain is 0, so the law has an atom Pr[N=0] at zero.
class SelectedGainLaw {
public:
    explicit SelectedGainLaw(UserCountDistribution count, FadingLaw fading = {})
        : count_(std::move(count)), fading_(fading)
    {
    }

    const UserCountDistribution& count() const { return count_; }
    const FadingLaw& fading() const { return fading_; }

    double cdf(double x) const
    {
        if (!(x >= 0.0))
            throw domain_error("selected_gain_cdf: gain must be non-negative");
        return pgf(count_, fading_.cdf(x));
    }

    /// 1 − F(x), accurate in the upper tail.
    double survival(double x) const { return pgf_complement(count_, fading_.survival(x)); }

    /// Density of the continuous part (the atom at 0 is excluded).
    double pdf(double x) const
    {
        if (!(x > 0.0))
            throw domain_error("selected_gain_pdf: gain must be positive");
        using D = UserCountDistribution;
        const double e = std::exp(-x);
        if (count_.kind() == CountKind::binomial) {
            // λ e^{−x} (1 − p e^{−x})^{λ/p − 1}
            const auto& b = count_.as<D::Binomial>();
            const double lambda = b.trials * b.success;
            return lambda * e * std::exp((b.trials - 1.0) * std::log1p(-b.success * e));
        }
        if (count_.kind() == CountKind::negative_binomial) {
            // r u e^{−x} (1 + u e^{−x})^{−1−r}
            const auto& nb = count_.as<D::NegBinomial>();
            const double u = nb.success / (1.0 - nb.success);
            return nb.failures * u * e * std::exp(-(1.0 + nb.failures) * std::log1p(u * e));
        }
        return pgf_derivative_complement(count_, e) * fading_.pdf(x);
    }

    double atom_at_zero() const { return pgf(count_, 0.0); }

    /// Smallest x with F(x) >= q; 0 when q is covered by the atom.
    double quantile(double q) const
    {
        if (!(q >= 0.0 && q < 1.0))
            throw domain_error("quantile: level must lie in [0, 1)");
        if (q <= atom_at_zero())
            return 0.0;
        double lo = 0.0;
        double hi = 1.0;
        while (cdf(hi) < q)
            hi *= 2.0;
        for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            (cdf(mid) < q ? lo : hi) = mid;
        }
        return hi;
    }

    /// Draw N, draw N gains, keep the largest (0 if nobody is active).
    template <typename URBG>
    double sample(URBG& rng) const
    {
        const std::uint64_t n = mudkit::sample(count_, rng);
        double best = 0.0;
        for (std::uint64_t i = 0; i < n; ++i)
            best = std::max(best, fading_.sample(rng));
        return best;
    }

private:
    UserCountDistribution count_;
    FadingLaw fading_;
};

inline double selected_gain_cdf(const SelectedGainLaw& law, double x) { return law.cdf(x); }
inline double selected_gain_pdf(const SelectedGainLaw& law, double x) { return law.pdf(x); }
inline double atom_at_zero(const SelectedGainLaw& law) { return law.atom_at_zero(); }

} // namespace mudkit
