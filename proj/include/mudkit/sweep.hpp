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

#include <mudkit/csv.hpp>
#include <mudkit/errors.hpp>
#include <mudkit/mcsim.hpp>
#include <mudkit/metrics.hpp>
#include <mudkit/parallel.hpp>
#include <mudkit/usercount.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

// Parameter sweeps: a list of count-law templates evaluated on a grid of one
// scenario variable, producing a table with one row per (law, grid point).

namespace mudkit::sweep {

enum class Variable { lambda, rho, r, L, R };
enum class Metric { outage, capacity, ber, ordering, lecam, scaling, jensen, regvar };
enum class MethodChoice { closed_form, quadrature, monte_carlo, all };
enum class Spacing { linear, log };

inline const char* to_string(Variable v)
{
    switch (v) {
    case Variable::lambda: return "lambda";
    case Variable::rho: return "rho";
    case Variable::r: return "r";
    case Variable::L: return "L";
    case Variable::R: return "R";
    }
    return "?";
}

inline const char* to_string(Metric m)
{
    switch (m) {
    case Metric::outage: return "outage";
    case Metric::capacity: return "capacity";
    case Metric::ber: return "ber";
    case Metric::ordering: return "ordering";
    case Metric::lecam: return "lecam";
    case Metric::scaling: return "scaling";
    case Metric::jensen: return "jensen";
    case Metric::regvar: return "regvar";
    }
    return "?";
}

inline Variable variable_from_name(const std::string& s)
{
    if (s == "lambda" || s == "λ")
        return Variable::lambda;
    if (s == "rho" || s == "ρ" || s == "snr")
        return Variable::rho;
    if (s == "r")
        return Variable::r;
    if (s == "L")
        return Variable::L;
    if (s == "R" || s == "rate")
        return Variable::R;
    throw validation_error("sweep_var", "unknown sweep variable '" + s + "' (lambda|rho|r|L|R)");
}

inline Metric metric_from_name(const std::string& s)
{
    for (Metric m : {Metric::outage, Metric::capacity, Metric::ber, Metric::ordering, Metric::lecam,
                     Metric::scaling, Metric::jensen, Metric::regvar}) {
        if (s == to_string(m))
            return m;
    }
    throw validation_error("metric",
                           "unknown metric '" + s + "' (outage|capacity|ber|ordering|lecam|scaling|jensen|regvar)");
}

inline MethodChoice method_from_name(const std::string& s)
{
    if (s == "closed_form")
        return MethodChoice::closed_form;
    if (s == "quadrature")
        return MethodChoice::quadrature;
    if (s == "monte_carlo")
        return MethodChoice::monte_carlo;
    if (s == "all")
        return MethodChoice::all;
    throw validation_error("method", "unknown method '" + s + "' (closed_form|quadrature|monte_carlo|all)");
}

/// Methods that make sense for a metric, in column order.
inline std::vector<Method> valid_methods(Metric m)
{
    switch (m) {
    case Metric::outage: return {Method::closed_form, Method::monte_carlo};
    case Metric::capacity: return {Method::quadrature, Method::monte_carlo};
    case Metric::ber: return {Method::closed_form, Method::quadrature, Method::monte_carlo};
    case Metric::ordering: return {Method::closed_form, Method::quadrature};
    case Metric::lecam: return {Method::closed_form, Method::quadrature};
    case Metric::scaling: return {Method::quadrature};
    case Metric::jensen: return {Method::quadrature};
    case Metric::regvar: return {Method::closed_form};
    }
    return {};
}

/// `count` points from start to stop inclusive, evenly spaced on a linear
/// or logarithmic axis.
inline std::vector<double> make_grid(double start, double stop, std::size_t count, Spacing spacing)
{
    if (count < 1)
        throw validation_error("grid", "count must be at least 1");
    if (!std::isfinite(start) || !std::isfinite(stop))
        throw validation_error("grid", "endpoints must be finite");
    if (count > 1 && start == stop)
        throw validation_error("grid", "start and stop coincide");
    if (spacing == Spacing::log && !(start > 0.0 && stop > 0.0))
        throw validation_error("grid", "log spacing needs positive endpoints");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        g[i] = spacing == Spacing::linear ? start + t * (stop - start)
                                          : std::exp(std::log(start) + t * (std::log(stop) - std::log(start)));
    }
    g.front() = start;
    g.back() = count == 1 ? start : stop;
    return g;
}

inline void check_grid(const std::vector<double>& g)
{
    if (g.empty())
        throw validation_error("grid", "grid must not be empty");
    for (double v : g) {
        if (!std::isfinite(v))
            throw validation_error("grid", "grid values must be finite");
    }
    if (g.size() < 2)
        return;
    const bool up = g[1] > g[0];
    for (std::size_t i = 1; i < g.size(); ++i) {
        if (up ? !(g[i] > g[i - 1]) : !(g[i] < g[i - 1]))
            throw validation_error("grid", "grid must be strictly monotone");
    }
}

/// A count law with some parameters left open for the sweep to fill in.
/// For binomial and NB laws a mean together with `success` determines the
/// trials or failures; a PB law is either an explicit `probs` vector or
/// generated from (L or success, mean, spread).
struct CountTemplate {
    CountKind kind = CountKind::poisson;
    std::optional<double> trials; // L, or n for a deterministic law
    std::optional<double> success;
    std::optional<double> failures;
    std::optional<double> mean;
    std::optional<std::vector<double>> probs;
    double spread = 0.0;
    std::string label;

    std::string name() const
    {
        if (!label.empty())
            return label;
        std::string s = mudkit::to_string(kind);
        std::string args;
        auto add = [&](const char* key, const std::optional<double>& v) {
            if (v)
                args += (args.empty() ? "" : ";") + std::string(key) + "=" + format_double(*v);
        };
        add(kind == CountKind::deterministic ? "n" : "L", trials);
        add("p", success);
        add("r", failures);
        add("lambda", mean);
        if (probs)
            args += (args.empty() ? "" : ";") + std::string("probs=") + std::to_string(probs->size());
        if (spread != 0.0)
            args += (args.empty() ? "" : ";") + std::string("spread=") + format_double(spread);
        return args.empty() ? s : s + "(" + args + ")";
    }

    UserCountDistribution resolve() const
    {
        using D = UserCountDistribution;
        switch (kind) {
        case CountKind::deterministic: {
            const double n = trials ? *trials : mean ? *mean : -1.0;
            if (!(n >= 0.0) || std::floor(n) != n)
                throw validation_error("n", "deterministic count needs a non-negative integer n");
            return D::deterministic(static_cast<std::uint64_t>(n));
        }
        case CountKind::binomial: {
            const double p = need(success, "success");
            return D::binomial(trials ? *trials : snap(need(mean, "lambda") / p), p);
        }
        case CountKind::negative_binomial: {
            const double p = need(success, "success");
            if (!(p > 0.0 && p < 1.0))
                throw validation_error("success", "NB success p must lie in (0,1)");
            return D::negative_binomial(failures ? *failures : need(mean, "lambda") * (1.0 - p) / p, p);
        }
        case CountKind::poisson:
            return D::poisson(need(mean, "lambda"));
        case CountKind::poisson_binomial: {
            if (probs)
                return D::poisson_binomial(*probs);
            double length = 0.0;
            if (trials)
                length = *trials;
            else
                length = std::max(1.0, std::round(need(mean, "lambda") / need(success, "success")));
            if (!(length >= 1.0) || std::floor(length) != length)
                throw validation_error("L", "PB length must be a positive integer");
            if (length > static_cast<double>(pb_max_length))
                throw validation_error("L", "PB length exceeds the PMF limit L <= " + std::to_string(pb_max_length));
            const double lambda = mean ? *mean : need(success, "success") * length;
            return D::poisson_binomial(spread_probabilities(static_cast<std::size_t>(length), lambda, spread));
        }
        }
        throw validation_error("kind", "unknown count kind");
    }

    /// The law with the sweep variable set to `value` (ρ and R leave it alone).
    UserCountDistribution resolve(Variable var, double value) const
    {
        CountTemplate t = *this;
        switch (var) {
        case Variable::lambda:
            if (probs)
                throw validation_error("sweep_var", "an explicit PB probability vector has a fixed mean");
            t.mean = value;
            if (kind != CountKind::poisson_binomial)
                t.trials.reset();
            t.failures.reset();
            break;
        case Variable::r:
            if (kind != CountKind::negative_binomial)
                throw validation_error("sweep_var", "r sweeps need NB laws, got " + name());
            t.failures = value;
            t.mean.reset();
            break;
        case Variable::L:
            if (kind != CountKind::binomial && kind != CountKind::poisson_binomial &&
                kind != CountKind::deterministic)
                throw validation_error("sweep_var", "L sweeps need binomial, PB or deterministic laws, got " + name());
            if (probs)
                throw validation_error("sweep_var", "an explicit PB probability vector has a fixed length");
            t.trials = value;
            if (kind == CountKind::binomial)
                t.mean.reset();
            break;
        case Variable::rho:
        case Variable::R:
            break;
        }
        return t.resolve();
    }

private:
    static double need(const std::optional<double>& v, const char* field)
    {
        if (!v)
            throw validation_error(field, "required parameter is missing");
        return *v;
    }

    static double snap(double trials)
    {
        const double r = std::round(trials);
        return std::abs(r - trials) <= 1e-9 * std::max(1.0, trials) ? r : trials;
    }
};

struct McSettings {
    std::uint64_t trials = 100'000;
    std::uint64_t seed = 1;
};

struct SweepSpec {
    Metric metric = Metric::capacity;
    std::vector<CountTemplate> distributions;
    Variable variable = Variable::lambda;
    std::vector<double> grid;
    /// everything but the count law
    Scenario fixed;
    MethodChoice method = MethodChoice::all;
    double tol = quad::default_rel_tol;
    /// add P_e(0)·Pr[N=0] to every BER (closed form, quadrature and MC)
    bool include_empty_atom = false;
    /// capacity output units; nats when absent
    std::optional<RateUnits> capacity_units;
    McSettings mc;
    /// regular-variation scale factor
    double kappa = 2.0;
    /// grid points evaluated concurrently
    std::size_t workers = 1;

    std::vector<Method> methods() const
    {
        const auto valid = valid_methods(metric);
        if (method == MethodChoice::all)
            return valid;
        const Method m = method == MethodChoice::closed_form ? Method::closed_form
                         : method == MethodChoice::quadrature ? Method::quadrature
                                                              : Method::monte_carlo;
        if (std::find(valid.begin(), valid.end(), m) == valid.end())
            throw validation_error("method", std::string("metric ") + to_string(metric) + " has no " +
                                                 mudkit::to_string(m) + " method");
        return {m};
    }

    void validate() const
    {
        methods();
        check_grid(grid);
        Scenario probe = fixed;
        if (variable == Variable::rho)
            probe.snr = grid.front();
        if (variable == Variable::R)
            probe.rate = grid.front();
        probe.validate();
        if (!(tol > 0.0))
            throw validation_error("tol", "tolerance must be positive");
        if (workers < 1)
            throw validation_error("workers", "need at least one worker");
        if (mc.trials < 1)
            throw validation_error("trials", "need at least one trial");
        if (metric == Metric::regvar) {
            if (!(kappa > 0.0) || kappa == 1.0)
                throw validation_error("kappa", "must be positive and different from 1");
            return;
        }
        if (distributions.empty())
            throw validation_error("distributions", "need at least one count law");
        if (metric == Metric::ordering && distributions.size() < 2)
            throw validation_error("distributions", "ordering needs at least two count laws");
        if (metric == Metric::scaling && variable != Variable::lambda)
            throw validation_error("sweep_var", "scaling sweeps run over lambda");
        if (metric == Metric::jensen && variable == Variable::R)
            throw validation_error("sweep_var", "Jensen gaps do not depend on R");
    }
};

/// Numerical failure at a specific grid point.
class grid_point_error : public convergence_error {
public:
    grid_point_error(const std::string& law, Variable var, double value, const std::string& what)
        : convergence_error("at " + law + ", " + to_string(var) + "=" + format_double(value) + ": " + what)
    {
    }
};

namespace detail {

inline bool has(const std::vector<Method>& ms, Method m) { return std::find(ms.begin(), ms.end(), m) != ms.end(); }

inline double capacity_scale(const SweepSpec& spec)
{
    return spec.capacity_units == RateUnits::bits ? 1.0 / std::numbers::ln2 : 1.0;
}

inline Scenario scenario_at(const SweepSpec& spec, const CountTemplate& t, double value)
{
    Scenario s = spec.fixed;
    s.count = t.resolve(spec.variable, value);
    if (spec.variable == Variable::rho)
        s.snr = value;
    if (spec.variable == Variable::R)
        s.rate = value;
    return s;
}

inline mc::McReport simulate(const SweepSpec& spec, const Scenario& s)
{
    mc::TrialConfig cfg;
    cfg.scenario = s;
    cfg.n_trials = spec.mc.trials;
    cfg.seed = spec.mc.seed;
    cfg.workers = 1;
    cfg.include_empty_atom = spec.include_empty_atom;
    cfg.cdf_points = {0.0};
    return mc::run(cfg);
}

inline std::vector<double> pb_probs(const UserCountDistribution& d)
{
    if (d.kind() == CountKind::poisson_binomial)
        return *d.as<UserCountDistribution::PoissonBinomial>().probs;
    if (d.kind() == CountKind::binomial) {
        const auto& b = d.as<UserCountDistribution::Binomial>();
        if (std::floor(b.trials) == b.trials && b.trials <= static_cast<double>(pb_max_length))
            return std::vector<double>(static_cast<std::size_t>(b.trials), b.success);
    }
    throw validation_error("distributions", "lecam needs PB laws or binomial laws with integer L");
}

inline std::vector<std::string> header(const SweepSpec& spec, const std::vector<Method>& ms)
{
    const std::string var = to_string(spec.variable);
    std::vector<std::string> h;
    auto mc_cols = [&] {
        if (has(ms, Method::monte_carlo)) {
            h.push_back("monte_carlo");
            h.push_back("monte_carlo_std_err");
        }
    };
    switch (spec.metric) {
    case Metric::outage:
        h = {"distribution", var};
        if (has(ms, Method::closed_form))
            h.push_back("closed_form");
        mc_cols();
        break;
    case Metric::capacity:
        h = {"distribution", var};
        if (has(ms, Method::quadrature))
            h.push_back("quadrature");
        mc_cols();
        break;
    case Metric::ber:
        h = {"distribution", var};
        if (has(ms, Method::closed_form))
            h.push_back("closed_form");
        if (has(ms, Method::quadrature))
            h.push_back("quadrature");
        mc_cols();
        break;
    case Metric::ordering:
        h = {"first", "second", var};
        if (has(ms, Method::closed_form))
            h.insert(h.end(), {"lt_holds", "max_violation", "witness_z"});
        if (has(ms, Method::quadrature))
            h.insert(h.end(), {"outage_first", "outage_second", "capacity_first", "capacity_second", "ber_first",
                               "ber_second", "metrics_ordered"});
        break;
    case Metric::lecam:
        h = {"distribution", var, "users", "mean"};
        if (has(ms, Method::closed_form))
            h.insert(h.end(), {"l1_distance", "lecam_bound"});
        if (has(ms, Method::quadrature))
            h.insert(h.end(), {"capacity_gap", "bound_witness"});
        break;
    case Metric::scaling:
        h = {"distribution", var, "capacity", "gap", "normalized_gap", "empty_mass_loglog", "relative_variance"};
        break;
    case Metric::jensen:
        h = {"distribution", var, "cap_fixed", "cap_random", "cap_gap", "ber_fixed", "ber_random", "ber_gap",
             "tightness_residual"};
        break;
    case Metric::regvar:
        h = {"ber_model", "u", "exponent", "extrapolated", "expected"};
        break;
    }
    return h;
}

inline std::vector<Cell> metric_row(const SweepSpec& spec, const std::vector<Method>& ms, const CountTemplate& t,
                                    double value)
{
    const Scenario s = scenario_at(spec, t, value);
    std::vector<Cell> row{t.name(), value};
    const double cap_scale = capacity_scale(spec);
    auto push_mc = [&](const MetricEstimate& e, double scale) {
        row.emplace_back(e.value * scale);
        row.emplace_back(*e.std_err * scale);
    };
    switch (spec.metric) {
    case Metric::outage:
        if (has(ms, Method::closed_form))
            row.emplace_back(outage_probability(s));
        if (has(ms, Method::monte_carlo))
            push_mc(simulate(spec, s).outage, 1.0);
        break;
    case Metric::capacity:
        if (has(ms, Method::quadrature))
            row.emplace_back(ergodic_capacity(s, spec.tol).value * cap_scale);
        if (has(ms, Method::monte_carlo))
            push_mc(simulate(spec, s).capacity, cap_scale);
        break;
    case Metric::ber:
        if (has(ms, Method::closed_form)) {
            const auto v = ber_closed_form(s, spec.include_empty_atom);
            row.push_back(v ? Cell{*v} : Cell{});
        }
        if (has(ms, Method::quadrature))
            row.emplace_back(ber_numeric(s, spec.tol, spec.include_empty_atom).value);
        if (has(ms, Method::monte_carlo))
            push_mc(simulate(spec, s).ber, 1.0);
        break;
    case Metric::lecam: {
        const auto probs = pb_probs(s.count);
        row.emplace_back(static_cast<std::int64_t>(probs.size()));
        row.emplace_back(mean(s.count));
        if (has(ms, Method::closed_form)) {
            row.emplace_back(pb_poisson_l1_distance(probs));
            row.emplace_back(lecam_bound(probs));
        }
        if (has(ms, Method::quadrature)) {
            const PoissonGap g = capacity_gap_pb_poisson(probs, s.snr, spec.tol);
            row.emplace_back(g.gap * cap_scale);
            row.push_back(g.bound_witness ? Cell{*g.bound_witness} : Cell{});
        }
        break;
    }
    case Metric::scaling: {
        const ScalingGapRow g = scaling_gap_at(s.count, s.snr, spec.tol);
        const ScalingConditionRow c = scaling_condition(s.count);
        row.insert(row.end(), {g.capacity, g.gap, g.normalized, c.empty_mass_loglog, c.relative_variance});
        break;
    }
    case Metric::jensen: {
        const JensenGaps j = jensen_gaps(s, spec.tol);
        const double lambda = mean(s.count);
        row.insert(row.end(), {j.cap_fixed * cap_scale, j.cap_random * cap_scale, j.cap_gap * cap_scale, j.ber_fixed,
                               j.ber_random, j.ber_gap, j.ber_gap * lambda / j.ber_fixed});
        break;
    }
    default:
        break;
    }
    return row;
}

inline std::vector<Cell> ordering_row(const SweepSpec& spec, const std::vector<Method>& ms, const CountTemplate& a,
                                      const CountTemplate& b, double value)
{
    const Scenario sa = scenario_at(spec, a, value);
    const Scenario sb = scenario_at(spec, b, value);
    std::vector<Cell> row{a.name(), b.name(), value};
    if (has(ms, Method::closed_form)) {
        const OrderingVerdict v = lt_order_check(sa.count, sb.count);
        row.emplace_back(static_cast<std::int64_t>(v.holds));
        row.emplace_back(v.max_violation);
        row.push_back(v.witness_z ? Cell{*v.witness_z} : Cell{});
    }
    if (has(ms, Method::quadrature)) {
        constexpr double slack = 1e-9;
        const double oa = outage_probability(sa);
        const double ob = outage_probability(sb);
        const double ca = ergodic_capacity(sa, spec.tol).value;
        const double cb = ergodic_capacity(sb, spec.tol).value;
        // the ordering statement is about the full law, so the atom is always in
        const double ba = ber_numeric(sa, spec.tol, true).value;
        const double bb = ber_numeric(sb, spec.tol, true).value;
        const bool ordered = oa >= ob - slack && ca <= cb + slack * std::max(1.0, cb) && ba >= bb - slack;
        const double scale = capacity_scale(spec);
        row.insert(row.end(), {oa, ob, ca * scale, cb * scale, ba, bb});
        row.emplace_back(static_cast<std::int64_t>(ordered));
    }
    return row;
}

inline std::vector<std::vector<Cell>> regvar_rows(const SweepSpec& spec)
{
    std::vector<std::vector<Cell>> rows;
    const Scenario& s = spec.fixed;
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
        const std::span<const double> head(spec.grid.data(), i + 1);
        const RegVarEstimate e = regvar_exponent(s.ber_model, s.snr, s.ber_eta, head, spec.kappa);
        rows.push_back({std::string(mudkit::to_string(s.ber_model)), spec.grid[i], e.raw_at_smallest, e.exponent,
                        e.expected});
    }
    return rows;
}

} // namespace detail

/// Evaluates the sweep. Rows come out in (law, grid point) order whatever
/// the number of workers.
inline Table run(const SweepSpec& spec)
{
    spec.validate();
    const auto ms = spec.methods();
    Table out;
    out.header = detail::header(spec, ms);
    if (spec.metric == Metric::regvar) {
        out.rows = detail::regvar_rows(spec);
        return out;
    }

    const std::size_t laws =
        spec.metric == Metric::ordering ? spec.distributions.size() - 1 : spec.distributions.size();
    const std::size_t points = spec.grid.size();
    out.rows.resize(laws * points);
    parallel_for(laws * points, spec.workers, [&](std::size_t task) {
        const std::size_t d = task / points;
        const double value = spec.grid[task % points];
        const CountTemplate& t = spec.distributions[d];
        try {
            out.rows[task] = spec.metric == Metric::ordering
                                 ? detail::ordering_row(spec, ms, t, spec.distributions[d + 1], value)
                                 : detail::metric_row(spec, ms, t, value);
        } catch (const grid_point_error&) {
            throw;
        } catch (const convergence_error& e) {
            throw grid_point_error(t.name(), spec.variable, value, e.what());
        }
    });
    return out;
}

} // namespace mudkit::sweep
