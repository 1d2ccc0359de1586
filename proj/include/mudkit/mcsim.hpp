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
#include <mudkit/metrics.hpp>
#include <mudkit/parallel.hpp>
#include <mudkit/random.hpp>
#include <mudkit/usercount.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

// Monte-Carlo simulation of the best-user selection procedure. Trials are
// grouped into fixed-size blocks; block b always draws from the substream
// (seed, b), and block partials are merged in block order, so the report is
// a function of (scenario, n_trials, seed) alone.

namespace mudkit::mc {

inline constexpr std::uint64_t block_size = 4096;

struct TrialConfig {
    Scenario scenario;
    std::uint64_t n_trials = 100'000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    /// N = 0 trials contribute P_e(0) to the BER when set, 0 otherwise
    bool include_empty_atom = true;
    /// gains at which the empirical CDF of the selected gain is recorded;
    /// empty means 20 quantiles of the analytic law
    std::vector<double> cdf_points;

    void validate() const
    {
        scenario.validate();
        if (n_trials < 1)
            throw validation_error("trials", "need at least one trial");
        if (workers < 1)
            throw validation_error("workers", "need at least one worker");
        for (double x : cdf_points) {
            if (!(x >= 0.0))
                throw validation_error("cdf_points", "gains must be non-negative");
        }
    }
};

struct CdfPoint {
    double x;
    double empirical;
    double std_err;
};

struct ActivityRate {
    double rate;
    double std_err;
};

struct McReport {
    MetricEstimate outage;
    MetricEstimate capacity;
    MetricEstimate ber;
    /// count_histogram[k] = number of trials with N = k; sums to n_trials
    std::vector<std::uint64_t> count_histogram;
    std::vector<CdfPoint> gain_cdf;
    /// per-user activity frequency (threshold mode only)
    std::vector<ActivityRate> activity;
    std::uint64_t n_trials = 0;

    double count_frequency(std::size_t k) const
    {
        return k < count_histogram.size()
                   ? static_cast<double>(count_histogram[k]) / static_cast<double>(n_trials)
                   : 0.0;
    }
};

namespace detail {

/// Running mean and squared deviation, mergeable (Chan et al.).
struct Moments {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x)
    {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }

    void merge(const Moments& o)
    {
        if (o.n == 0)
            return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double total = static_cast<double>(n + o.n);
        const double d = o.mean - mean;
        mean += d * static_cast<double>(o.n) / total;
        m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / total;
        n += o.n;
    }

    MetricEstimate estimate() const
    {
        const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
        return {mean, Method::monte_carlo, std::sqrt(std::max(var, 0.0) / static_cast<double>(n))};
    }
};

struct Partial {
    Moments outage;
    Moments capacity;
    Moments ber;
    std::vector<std::uint64_t> histogram;
    std::vector<std::uint64_t> below;  // per cdf point
    std::vector<std::uint64_t> active; // per user, threshold mode

    void merge(const Partial& o)
    {
        outage.merge(o.outage);
        capacity.merge(o.capacity);
        ber.merge(o.ber);
        if (histogram.size() < o.histogram.size())
            histogram.resize(o.histogram.size(), 0);
        for (std::size_t k = 0; k < o.histogram.size(); ++k)
            histogram[k] += o.histogram[k];
        for (std::size_t i = 0; i < o.below.size(); ++i)
            below[i] += o.below[i];
        for (std::size_t i = 0; i < o.active.size(); ++i)
            active[i] += o.active[i];
    }
};

struct Recorder {
    double threshold;
    double snr;
    ErrorRateModel pe;
    bool include_empty_atom;
    const std::vector<double>* points;

    void record(Partial& part, std::uint64_t n, double best) const
    {
        if (part.histogram.size() <= n)
            part.histogram.resize(n + 1, 0);
        ++part.histogram[n];
        // outage iff the selected rate falls short of R, i.e. gain below the threshold
        part.outage.add(best < threshold ? 1.0 : 0.0);
        part.capacity.add(std::log1p(snr * best));
        if (n == 0)
            part.ber.add(include_empty_atom ? pe.at_zero() : 0.0);
        else
            part.ber.add(pe.at(snr * best));
        for (std::size_t i = 0; i < points->size(); ++i)
            part.below[i] += best <= (*points)[i] ? 1 : 0;
    }
};

template <typename Trial>
McReport run_blocks(const TrialConfig& cfg, std::vector<double> points, std::size_t users, const Trial& trial)
{
    const std::uint64_t n_blocks = (cfg.n_trials + block_size - 1) / block_size;
    std::vector<Partial> partials(n_blocks);
    const Recorder rec{outage_gain_threshold(cfg.scenario), cfg.scenario.snr, cfg.scenario.error_model(),
                       cfg.include_empty_atom, &points};
    parallel_for(n_blocks, cfg.workers, [&](std::size_t b) {
        Partial& part = partials[b];
        part.below.assign(points.size(), 0);
        part.active.assign(users, 0);
        CounterStream rng(cfg.seed, b);
        const std::uint64_t begin = b * block_size;
        const std::uint64_t end = std::min(cfg.n_trials, begin + block_size);
        for (std::uint64_t t = begin; t < end; ++t)
            trial(rng, part, rec);
    });

    Partial total;
    total.below.assign(points.size(), 0);
    total.active.assign(users, 0);
    for (const Partial& p : partials)
        total.merge(p);

    McReport out;
    out.n_trials = cfg.n_trials;
    out.outage = total.outage.estimate();
    out.capacity = total.capacity.estimate();
    out.ber = total.ber.estimate();
    out.count_histogram = std::move(total.histogram);
    const double n = static_cast<double>(cfg.n_trials);
    auto proportion = [n](std::uint64_t hits) {
        const double r = static_cast<double>(hits) / n;
        return std::pair{r, std::sqrt(r * (1.0 - r) / n)};
    };
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto [r, se] = proportion(total.below[i]);
        out.gain_cdf.push_back({points[i], r, se});
    }
    for (std::uint64_t hits : total.active) {
        const auto [r, se] = proportion(hits);
        out.activity.push_back({r, se});
    }
    return out;
}

inline std::vector<double> default_cdf_points(const UserCountDistribution& count)
{
    const SelectedGainLaw law(count);
    std::vector<double> pts;
    for (int k = 1; k <= 20; ++k)
        pts.push_back(law.quantile(k / 21.0));
    return pts;
}

template <typename URBG>
double best_of(std::uint64_t n, URBG& rng)
{
    double best = 0.0;
    for (std::uint64_t i = 0; i < n; ++i)
        best = std::max(best, unit_exponential(rng));
    return best;
}

} // namespace detail

/// Simulates the selection procedure from the activity mechanism: user i
/// joins the active set when its unit-exponential interference gain stays
/// below Q_i = −ln(1 − p_i). Entries of `probs` may be 0 or 1.
inline McReport run_threshold_mode(std::vector<double> probs, const TrialConfig& cfg)
{
    cfg.validate();
    if (probs.empty())
        throw validation_error("probs", "need at least one user");
    std::vector<double> thresholds;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0))
            throw validation_error("probs", "activity probabilities must lie in [0,1]");
        thresholds.push_back(p == 1.0 ? std::numeric_limits<double>::infinity() : -std::log1p(-p));
    }
    std::vector<double> points = cfg.cdf_points;
    if (points.empty()) {
        std::vector<double> nonzero;
        for (double p : probs) {
            if (p > 0.0)
                nonzero.push_back(p);
        }
        points = nonzero.empty() ? std::vector<double>{0.0}
                                 : detail::default_cdf_points(UserCountDistribution::poisson_binomial(nonzero));
    }
    const auto trial = [&thresholds](CounterStream& rng, detail::Partial& part, const detail::Recorder& rec) {
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (unit_exponential(rng) < thresholds[i]) {
                ++n;
                ++part.active[i];
            }
        }
        rec.record(part, n, detail::best_of(n, rng));
    };
    return detail::run_blocks(cfg, std::move(points), thresholds.size(), trial);
}

/// Homogeneous threshold mode: L users, common interference threshold Q.
inline McReport run_threshold_mode(std::size_t users, double threshold, const TrialConfig& cfg)
{
    if (users < 1)
        throw validation_error("L", "need at least one user");
    return run_threshold_mode(std::vector<double>(users, success_prob(threshold)), cfg);
}

/// Simulates cfg.scenario: draw N, draw N gains, select the best. A
/// Poisson-binomial count is simulated user by user.
inline McReport run(const TrialConfig& cfg)
{
    cfg.validate();
    const auto& count = cfg.scenario.count;
    if (count.kind() == CountKind::poisson_binomial) {
        TrialConfig c = cfg;
        if (c.cdf_points.empty())
            c.cdf_points = detail::default_cdf_points(count);
        return run_threshold_mode(*count.as<UserCountDistribution::PoissonBinomial>().probs, c);
    }
    std::vector<double> points = cfg.cdf_points.empty() ? detail::default_cdf_points(count) : cfg.cdf_points;
    const auto trial = [&count](CounterStream& rng, detail::Partial& part, const detail::Recorder& rec) {
        const std::uint64_t n = sample(count, rng);
        rec.record(part, n, detail::best_of(n, rng));
    };
    return detail::run_blocks(cfg, std::move(points), 0, trial);
}

} // namespace mudkit::mc
