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

#include <mudkit/mcsim.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace mudkit;
using D = UserCountDistribution;

namespace {

std::vector<D> five_variants(double lambda)
{
    const auto users = static_cast<std::size_t>(2.0 * lambda);
    return {D::deterministic(static_cast<std::uint64_t>(lambda)), D::binomial(2.0 * lambda, 0.5),
            D::negative_binomial(lambda, 0.5), D::poisson(lambda),
            D::poisson_binomial(spread_probabilities(users, lambda, 0.5))};
}

mc::TrialConfig config(D count, double rho, std::uint64_t trials, std::uint64_t seed = 11)
{
    mc::TrialConfig cfg;
    cfg.scenario.count = std::move(count);
    cfg.scenario.snr = rho;
    // gain threshold exactly 1, so outage is never vanishingly rare
    cfg.scenario.rate = std::log2(1.0 + rho);
    cfg.n_trials = trials;
    cfg.seed = seed;
    return cfg;
}

void expect_same(const mc::McReport& a, const mc::McReport& b)
{
    EXPECT_EQ(a.outage.value, b.outage.value);
    EXPECT_EQ(a.capacity.value, b.capacity.value);
    EXPECT_EQ(a.ber.value, b.ber.value);
    EXPECT_EQ(*a.outage.std_err, *b.outage.std_err);
    EXPECT_EQ(*a.capacity.std_err, *b.capacity.std_err);
    EXPECT_EQ(*a.ber.std_err, *b.ber.std_err);
    EXPECT_EQ(a.count_histogram, b.count_histogram);
    ASSERT_EQ(a.gain_cdf.size(), b.gain_cdf.size());
    for (std::size_t i = 0; i < a.gain_cdf.size(); ++i)
        EXPECT_EQ(a.gain_cdf[i].empirical, b.gain_cdf[i].empirical);
    ASSERT_EQ(a.activity.size(), b.activity.size());
    for (std::size_t i = 0; i < a.activity.size(); ++i)
        EXPECT_EQ(a.activity[i].rate, b.activity[i].rate);
}

} // namespace

TEST(MonteCarlo, ReportShape)
{
    const auto r = mc::run(config(D::poisson(3.0), 10.0, 10'000));
    EXPECT_EQ(r.n_trials, 10'000u);
    EXPECT_EQ(std::accumulate(r.count_histogram.begin(), r.count_histogram.end(), std::uint64_t{0}), 10'000u);
    for (const auto* m : {&r.outage, &r.capacity, &r.ber}) {
        EXPECT_EQ(m->method, Method::monte_carlo);
        ASSERT_TRUE(m->std_err.has_value());
        EXPECT_GT(*m->std_err, 0.0);
    }
    EXPECT_EQ(r.gain_cdf.size(), 20u);
    EXPECT_TRUE(r.activity.empty());
}

TEST(MonteCarlo, IndependentOfWorkerCount)
{
    for (const auto& count : {D::poisson(4.0), D::poisson_binomial({0.3, 0.6, 0.9})}) {
        // not a multiple of the block size, so the last block is partial
        auto cfg = config(count, 10.0, 50'001, 5);
        const auto one = mc::run(cfg);
        for (std::size_t w : {2u, 3u, 8u}) {
            cfg.workers = w;
            expect_same(one, mc::run(cfg));
        }
    }
    auto cfg = config(D::poisson(4.0), 10.0, 20'000, 5);
    const auto a = mc::run(cfg);
    cfg.seed = 6;
    EXPECT_NE(a.capacity.value, mc::run(cfg).capacity.value);
}

TEST(MonteCarlo, AgreesWithAnalyticOnStandardGrid)
{
    std::uint64_t seed = 100;
    for (double lambda : {2.0, 4.0, 8.0}) {
        for (double rho : {1.0, 10.0, 100.0}) {
            // at ρ = 100 the BER is carried by events of probability ~1e-5
            // (empty set, tiny best gain); the sample std_err is only
            // trustworthy once a few of them are drawn
            const std::uint64_t trials = rho > 50.0 ? 1'000'000 : 200'000;
            for (const auto& count : five_variants(lambda)) {
                auto cfg = config(count, rho, trials, seed++);
                cfg.workers = 4;
                const auto r = mc::run(cfg);
                const auto& s = cfg.scenario;
                const std::string where = count.describe() + " rho=" + std::to_string(rho);
                EXPECT_LE(std::abs(r.outage.value - outage_probability(s)), 4.0 * *r.outage.std_err) << where;
                EXPECT_LE(std::abs(r.capacity.value - ergodic_capacity(s).value), 4.0 * *r.capacity.std_err)
                    << where;
                // eight fixed users at ρ = 100 give BER ≈ 1.4e-12, carried by
                // events of probability ~1e-11: out of reach of plain sampling
                if (count.kind() == CountKind::deterministic && lambda == 8.0 && rho == 100.0)
                    continue;
                EXPECT_LE(std::abs(r.ber.value - ber_numeric(s, 1e-10, true).value), 4.0 * *r.ber.std_err)
                    << where;
            }
        }
    }
}

TEST(MonteCarlo, EmpiricalGainCdfWithinFourStandardErrors)
{
    for (const auto& count : five_variants(4.0)) {
        const auto r = mc::run(config(count, 10.0, 200'000, 31));
        const SelectedGainLaw law(count);
        for (const auto& pt : r.gain_cdf) {
            const double f = law.cdf(pt.x);
            const double se = std::sqrt(f * (1.0 - f) / 200'000.0);
            EXPECT_LE(std::abs(pt.empirical - f), 4.0 * se + 1e-12) << count.describe() << " x=" << pt.x;
        }
    }
}

TEST(MonteCarlo, EmptyAtomFlag)
{
    auto cfg = config(D::poisson(0.5), 10.0, 200'000, 77);
    cfg.include_empty_atom = false;
    const auto r = mc::run(cfg);
    EXPECT_LE(std::abs(r.ber.value - ber_numeric(cfg.scenario, 1e-10, false).value), 4.0 * *r.ber.std_err);
    cfg.include_empty_atom = true;
    const auto with = mc::run(cfg);
    // same draws; only the N = 0 trials change
    EXPECT_NEAR(with.ber.value - r.ber.value, 0.5 * with.count_frequency(0), 1e-12);
}

TEST(ThresholdMode, CommonThresholdGivesBinomialCounts)
{
    // Q = ln 2 makes every user active with probability 1/2
    auto cfg = config(D::poisson(1.0), 10.0, 200'000, 3);
    const auto r = mc::run_threshold_mode(8, std::log(2.0), cfg);
    ASSERT_EQ(r.activity.size(), 8u);
    for (const auto& a : r.activity)
        EXPECT_LE(std::abs(a.rate - 0.5), 4.0 * a.std_err);
    const auto bin = D::binomial(8, 0.5);
    for (std::size_t k = 0; k <= 8; ++k) {
        const double p = pmf(bin, k);
        EXPECT_LE(std::abs(r.count_frequency(k) - p), 4.0 * std::sqrt(p * (1 - p) / 200'000.0)) << k;
    }
    auto s = cfg.scenario;
    s.count = bin;
    EXPECT_LE(std::abs(r.capacity.value - ergodic_capacity(s).value), 4.0 * *r.capacity.std_err);
}

TEST(ThresholdMode, CertainAndImpossibleUsers)
{
    auto cfg = config(D::poisson(1.0), 10.0, 10'000, 3);
    const auto r = mc::run_threshold_mode({1.0, 0.0, 1.0, 0.0}, cfg);
    EXPECT_EQ(r.activity[0].rate, 1.0);
    EXPECT_EQ(r.activity[1].rate, 0.0);
    EXPECT_EQ(r.activity[2].rate, 1.0);
    EXPECT_EQ(r.activity[3].rate, 0.0);
    EXPECT_EQ(r.activity[0].std_err, 0.0);
    EXPECT_EQ(r.count_frequency(2), 1.0);
    const auto none = mc::run_threshold_mode({0.0, 0.0}, cfg);
    EXPECT_EQ(none.outage.value, 1.0);
    EXPECT_EQ(none.capacity.value, 0.0);
    EXPECT_EQ(none.ber.value, 0.5);
}

TEST(ThresholdMode, HeterogeneousUsersMatchPoissonBinomial)
{
    auto cfg = config(D::poisson(1.0), 10.0, 400'000, 9);
    const auto r = mc::run_threshold_mode({0.9, 0.1}, cfg);
    EXPECT_LE(std::abs(r.activity[0].rate - 0.9), 4.0 * r.activity[0].std_err);
    EXPECT_LE(std::abs(r.activity[1].rate - 0.1), 4.0 * r.activity[1].std_err);
    auto s = cfg.scenario;
    s.count = D::poisson_binomial({0.9, 0.1});
    EXPECT_LE(std::abs(r.outage.value - outage_probability(s)), 4.0 * *r.outage.std_err);
    EXPECT_LE(std::abs(r.count_frequency(0) - 0.09), 4.0 * std::sqrt(0.09 * 0.91 / 400'000.0));
}

TEST(MonteCarlo, Validation)
{
    auto cfg = config(D::poisson(1.0), 10.0, 0);
    EXPECT_THROW(mc::run(cfg), validation_error);
    cfg.n_trials = 10;
    cfg.workers = 0;
    EXPECT_THROW(mc::run(cfg), validation_error);
    cfg.workers = 1;
    EXPECT_THROW(mc::run_threshold_mode({0.5, 1.5}, cfg), validation_error);
    EXPECT_THROW(mc::run_threshold_mode(std::vector<double>{}, cfg), validation_error);
    EXPECT_THROW(mc::run_threshold_mode(0, 1.0, cfg), validation_error);
    cfg.cdf_points = {-1.0};
    EXPECT_THROW(mc::run(cfg), validation_error);
}
