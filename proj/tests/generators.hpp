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

// Hand-rolled random generators shared by the property tests and the
// acceptance run.

#include <mudkit/usercount.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace gen {

/// Activity probabilities of length L in (0, 1], drawn i.i.d. uniform on
/// (lo, hi] and clipped away from 0.
inline std::vector<double> random_probs(std::mt19937_64& rng, std::size_t length, double lo = 0.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> p(length);
    for (auto& x : p)
        x = std::max(u(rng), 1e-6);
    return p;
}

/// Non-uniform vector of length L with entries in (0, 1] summing to λ.
inline std::vector<double> perturbed_probs(std::mt19937_64& rng, std::size_t length, double lambda)
{
    const double base = lambda / static_cast<double>(length);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> t(length);
    for (auto& x : t)
        x = u(rng);
    double avg = 0.0;
    for (double x : t)
        avg += x;
    avg /= static_cast<double>(length);
    double span = 0.0;
    for (auto& x : t) {
        x -= avg;
        span = std::max(span, std::abs(x));
    }
    // keep every entry inside (0, 1]
    const double room = std::min(base, 1.0 - base);
    std::uniform_real_distribution<double> frac(0.2, 0.95);
    const double scale = span > 0.0 ? frac(rng) * room / span : 0.0;
    std::vector<double> p(length);
    for (std::size_t i = 0; i < length; ++i)
        p[i] = base + scale * t[i];
    return p;
}

/// Equal-mean counts expected to satisfy NB ≥ Poisson ≥ binomial ≥ PB in
/// PGF order. The binomial and PB laws share the number of users L.
struct Quadruple {
    double lambda;
    mudkit::UserCountDistribution nb;
    mudkit::UserCountDistribution poisson;
    mudkit::UserCountDistribution binomial;
    mudkit::UserCountDistribution pb;
};

inline Quadruple random_quadruple(std::mt19937_64& rng)
{
    using D = mudkit::UserCountDistribution;
    std::uniform_int_distribution<int> length(2, 60);
    std::uniform_real_distribution<double> fill(0.05, 0.95);
    std::uniform_real_distribution<double> nb_success(0.05, 0.95);
    const int users = length(rng);
    const double lambda = fill(rng) * users;
    const double q = nb_success(rng);
    return {lambda, D::negative_binomial(lambda * (1.0 - q) / q, q), D::poisson(lambda),
            D::binomial(users, lambda / users), D::poisson_binomial(perturbed_probs(rng, users, lambda))};
}

} // namespace gen
