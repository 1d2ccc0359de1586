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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <vector>

// Globally adaptive 15-point Gauss–Kronrod integration (QUADPACK QAG
// strategy): repeatedly bisect the interval with the largest error estimate.

namespace mudkit::quad {

inline constexpr double default_rel_tol = 1e-9;
inline constexpr std::size_t default_max_subdivisions = 1'000'000;

struct Options {
    double rel_tol = default_rel_tol;
    double abs_tol = 0.0;
    std::size_t max_subdivisions = default_max_subdivisions;
};

struct Result {
    double value = 0.0;
    double abs_error = 0.0;
    std::size_t intervals = 0;
};

namespace detail {

inline constexpr std::array<double, 8> xgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
};
inline constexpr std::array<double, 8> wgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
};
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
};

struct Segment {
    double a;
    double b;
    double value;
    double error;

    bool operator<(const Segment& other) const { return error < other.error; }
};

template <typename F>
Segment gauss_kronrod_15(const F& f, double a, double b)
{
    constexpr double epmach = std::numeric_limits<double>::epsilon();
    constexpr double uflow = std::numeric_limits<double>::min();
    const double centr = 0.5 * (a + b);
    const double hlgth = 0.5 * (b - a);
    const double dhlgth = std::abs(hlgth);

    const double fc = f(centr);
    double resg = fc * wg[3];
    double resk = fc * wgk[7];
    double resabs = std::abs(resk);
    std::array<double, 7> fv1{};
    std::array<double, 7> fv2{};
    for (std::size_t j = 0; j < 3; ++j) {
        const std::size_t jtw = 2 * j + 1;
        const double absc = hlgth * xgk[jtw];
        const double f1 = f(centr - absc);
        const double f2 = f(centr + absc);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        resg += wg[j] * (f1 + f2);
        resk += wgk[jtw] * (f1 + f2);
        resabs += wgk[jtw] * (std::abs(f1) + std::abs(f2));
    }
    for (std::size_t j = 0; j < 4; ++j) {
        const std::size_t jtwm1 = 2 * j;
        const double absc = hlgth * xgk[jtwm1];
        const double f1 = f(centr - absc);
        const double f2 = f(centr + absc);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        resk += wgk[jtwm1] * (f1 + f2);
        resabs += wgk[jtwm1] * (std::abs(f1) + std::abs(f2));
    }
    const double reskh = resk * 0.5;
    double resasc = wgk[7] * std::abs(fc - reskh);
    for (std::size_t j = 0; j < 7; ++j)
        resasc += wgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));

    const double result = resk * hlgth;
    resabs *= dhlgth;
    resasc *= dhlgth;
    double abserr = std::abs((resk - resg) * hlgth);
    if (resasc != 0.0 && abserr != 0.0)
        abserr = resasc * std::min(1.0, std::pow(200.0 * abserr / resasc, 1.5));
    if (resabs > uflow / (50.0 * epmach))
        abserr = std::max(epmach * 50.0 * resabs, abserr);
    return {a, b, result, abserr};
}

} // namespace detail

/// ∫ₐᵇ f(x) dx to max(abs_tol, rel_tol·|I|).
template <typename F>
Result integrate(const F& f, double a, double b, const Options& opt = {})
{
    if (!(opt.rel_tol > 0.0) && !(opt.abs_tol > 0.0))
        throw validation_error("tol", "quadrature needs a positive tolerance");
    if (a == b)
        return {};

    std::priority_queue<detail::Segment> heap;
    detail::Segment first = detail::gauss_kronrod_15(f, a, b);
    double total = first.value;
    double error = first.error;
    heap.push(first);
    // error of segments too narrow to bisect further
    double frozen_error = 0.0;
    double frozen_value = 0.0;

    auto tolerance = [&] { return std::max(opt.abs_tol, opt.rel_tol * std::abs(total)); };

    while (error > tolerance()) {
        if (heap.empty()) {
            throw convergence_error("quadrature: requested tolerance unreachable (roundoff), "
                                    "estimated error " + std::to_string(error));
        }
        if (heap.size() + 1 > opt.max_subdivisions) {
            throw convergence_error("quadrature: subdivision limit " +
                                    std::to_string(opt.max_subdivisions) + " reached");
        }
        const detail::Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            frozen_error += worst.error;
            frozen_value += worst.value;
            continue;
        }
        const detail::Segment left = detail::gauss_kronrod_15(f, worst.a, mid);
        const detail::Segment right = detail::gauss_kronrod_15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // re-sum to shed the drift of the incremental updates
    Result out;
    out.intervals = heap.size();
    out.value = frozen_value;
    out.abs_error = frozen_error;
    while (!heap.empty()) {
        out.value += heap.top().value;
        out.abs_error += heap.top().error;
        heap.pop();
    }
    if (!std::isfinite(out.value))
        throw convergence_error("quadrature: integrand produced a non-finite value");
    return out;
}

/// ∫₀^∞ f(x) dx via the substitution y = e^{−x}, which maps the half line
/// onto (0, 1]; `g(y)` must already contain the Jacobian, i.e. the caller
/// integrates g(y) = f(−ln y)/y over (0, 1].
template <typename G>
Result integrate_unit(const G& g, const Options& opt = {})
{
    return integrate(g, 0.0, 1.0, opt);
}

} // namespace mudkit::quad
