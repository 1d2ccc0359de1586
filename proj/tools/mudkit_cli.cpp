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

// mudkit: command-line front end for the mudkit library.
//
// Exit codes: 0 success, 2 invalid input (the message names the field),
// 3 numerical non-convergence (the message names the grid point), 1 other.

#include "scenario_file.hpp"

#include <mudkit/mudkit.hpp>

#include "CLI11.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

using namespace mudkit;
using mudkit::cli::Manifest;

struct Flags {
    std::string scenario;
    std::string metric;
    std::string method;
    std::string sweep_var;
    std::string grid;
    std::string rate_units;
    std::string out = "-";
    std::uint64_t seed = 1;
    std::uint64_t trials = 100'000;
    std::size_t workers = 1;
    bool include_empty_atom = false;
    std::size_t threshold_users = 0;
    double threshold_q = 0.0;

    std::vector<CLI::Option*> metric_opt;
    std::vector<CLI::Option*> method_opt;
    std::vector<CLI::Option*> sweep_var_opt;
    std::vector<CLI::Option*> grid_opt;
    std::vector<CLI::Option*> rate_units_opt;
    std::vector<CLI::Option*> seed_opt;
    std::vector<CLI::Option*> trials_opt;
    std::vector<CLI::Option*> workers_opt;
    std::vector<CLI::Option*> atom_opt;
    std::vector<CLI::Option*> users_opt;
    std::vector<CLI::Option*> q_opt;

    static bool given(const std::vector<CLI::Option*>& opts)
    {
        return std::any_of(opts.begin(), opts.end(), [](const CLI::Option* o) { return o->count() > 0; });
    }
};

void add_common(CLI::App* sub, Flags& f)
{
    sub->add_option("--scenario", f.scenario, "JSON scenario manifest");
    f.grid_opt.push_back(sub->add_option("--grid", f.grid, "grid: v1,v2,... or start:stop:count[:linear|log]"));
    f.seed_opt.push_back(sub->add_option("--seed", f.seed, "Monte-Carlo seed"));
    f.trials_opt.push_back(sub->add_option("--trials", f.trials, "Monte-Carlo trials"));
    f.workers_opt.push_back(sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber));
    sub->add_option("--out", f.out, "output file, - for stdout");
    f.rate_units_opt.push_back(sub->add_option("--rate-units", f.rate_units, "units of R and of reported capacity")
                           ->check(CLI::IsMember({"bits", "nats"})));
    f.atom_opt.push_back(sub->add_flag("--include-empty-atom", f.include_empty_atom,
                               "count P_e(0)*Pr[N=0] in the BER (accepts =false)"));
}

void add_sweep_flags(CLI::App* sub, Flags& f, bool with_metric)
{
    if (with_metric)
        f.metric_opt.push_back(sub->add_option("--metric", f.metric, "outage|capacity|ber|ordering|lecam|scaling|jensen|regvar"));
    f.method_opt.push_back(sub->add_option("--method", f.method, "closed_form|quadrature|monte_carlo|all"));
    f.sweep_var_opt.push_back(sub->add_option("--sweep-var", f.sweep_var, "lambda|rho|r|L|R"));
}

std::vector<double> parse_grid_flag(const std::string& s)
{
    auto to_number = [](const std::string& tok) {
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size() || errno == ERANGE)
            throw validation_error("grid", "cannot read '" + tok + "' as a number");
        return v;
    };
    auto split = [](const std::string& text, char sep) {
        std::vector<std::string> parts;
        std::string cur;
        for (char c : text) {
            if (c == sep) {
                parts.push_back(cur);
                cur.clear();
            } else if (c != ' ') {
                cur += c;
            }
        }
        parts.push_back(cur);
        return parts;
    };
    if (s.find(':') != std::string::npos) {
        const auto p = split(s, ':');
        if (p.size() < 3 || p.size() > 4)
            throw validation_error("grid", "expected start:stop:count[:linear|log]");
        const double count = to_number(p[2]);
        if (!(count >= 1.0) || std::floor(count) != count)
            throw validation_error("grid", "count must be a positive integer");
        sweep::Spacing spacing = sweep::Spacing::linear;
        if (p.size() == 4) {
            if (p[3] == "log")
                spacing = sweep::Spacing::log;
            else if (p[3] != "linear")
                throw validation_error("grid", "spacing must be linear or log");
        }
        return sweep::make_grid(to_number(p[0]), to_number(p[1]), static_cast<std::size_t>(count), spacing);
    }
    std::vector<double> g;
    for (const auto& tok : split(s, ','))
        g.push_back(to_number(tok));
    return g;
}

double default_tolerance()
{
    const char* env = std::getenv("MUDKIT_DEFAULT_TOL");
    if (env == nullptr || *env == '\0')
        return quad::default_rel_tol;
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (*end != '\0' || !(v > 0.0) || !std::isfinite(v))
        throw validation_error("MUDKIT_DEFAULT_TOL", std::string("expected a positive number, got '") + env + "'");
    return v;
}

Manifest load(const Flags& f)
{
    return f.scenario.empty() ? Manifest{} : cli::load_manifest(f.scenario);
}

/// Applies units, tolerance and Monte-Carlo settings shared by every command.
struct Common {
    Scenario scenario;
    std::optional<RateUnits> capacity_units;
    double tol;
    std::uint64_t trials;
    std::uint64_t seed;
    std::size_t workers;
    std::optional<bool> include_empty_atom;
};

Common resolve_common(const Manifest& m, const Flags& f)
{
    Common c{m.scenario, std::nullopt, default_tolerance(), 100'000, 1, 1, m.include_empty_atom};
    if (m.rate_units_given)
        c.capacity_units = c.scenario.rate_units;
    if (Flags::given(f.rate_units_opt)) {
        c.scenario.rate_units = f.rate_units == "bits" ? RateUnits::bits : RateUnits::nats;
        c.capacity_units = c.scenario.rate_units;
    }
    if (m.tol)
        c.tol = *m.tol;
    c.trials = Flags::given(f.trials_opt) ? f.trials : m.trials.value_or(c.trials);
    c.seed = Flags::given(f.seed_opt) ? f.seed : m.seed.value_or(c.seed);
    c.workers = Flags::given(f.workers_opt) ? f.workers : m.workers.value_or(c.workers);
    if (Flags::given(f.atom_opt))
        c.include_empty_atom = f.include_empty_atom;
    return c;
}

void emit(const Flags& f, const Table& t)
{
    if (f.out == "-") {
        write_csv(std::cout, t);
        return;
    }
    std::ofstream os(f.out);
    if (!os)
        throw std::runtime_error("cannot write '" + f.out + "'");
    write_csv(os, t);
}

sweep::CountTemplate tmpl(CountKind kind, std::optional<double> success = std::nullopt, double spread = 0.0)
{
    sweep::CountTemplate t;
    t.kind = kind;
    t.success = success;
    t.spread = spread;
    return t;
}

/// Defaults that make each command reproduce its standard experiment when
/// run without a manifest.
struct SweepDefaults {
    sweep::Metric metric;
    std::vector<sweep::CountTemplate> distributions;
    sweep::Variable variable;
    std::vector<double> grid;
};

SweepDefaults default_experiment(sweep::Metric metric)
{
    using sweep::Metric;
    using sweep::Variable;
    SweepDefaults d{metric, {}, Variable::lambda, sweep::make_grid(2.0, 64.0, 6, sweep::Spacing::log)};
    switch (metric) {
    case Metric::ordering:
        d.distributions = {tmpl(CountKind::negative_binomial, 0.5), tmpl(CountKind::poisson),
                           tmpl(CountKind::binomial, 0.5), tmpl(CountKind::poisson_binomial, 0.5, 0.5)};
        d.grid = {2.0, 4.0, 8.0};
        break;
    case Metric::lecam: {
        auto pb = tmpl(CountKind::poisson_binomial);
        pb.mean = 1.0;
        d.distributions = {pb};
        d.variable = Variable::L;
        d.grid = {100.0, 1000.0, 10000.0};
        break;
    }
    case Metric::scaling:
        d.distributions = {tmpl(CountKind::binomial, 0.5), tmpl(CountKind::negative_binomial, 0.5),
                           tmpl(CountKind::poisson), tmpl(CountKind::deterministic)};
        d.grid = {100.0, 1000.0, 10000.0};
        break;
    case Metric::jensen:
        d.distributions = {tmpl(CountKind::poisson)};
        d.grid = {4.0, 16.0, 64.0, 256.0};
        break;
    case Metric::regvar:
        d.grid = {1e-3, 1e-4, 1e-5, 1e-6};
        break;
    default:
        d.distributions = {tmpl(CountKind::binomial, 0.5), tmpl(CountKind::binomial, 0.2),
                           tmpl(CountKind::negative_binomial, 0.5), tmpl(CountKind::negative_binomial, 0.2),
                           tmpl(CountKind::poisson)};
        break;
    }
    return d;
}

int cmd_sweep(const Flags& f, std::optional<sweep::Metric> fixed_metric)
{
    const Manifest m = load(f);
    const Common c = resolve_common(m, f);

    sweep::Metric metric = fixed_metric.value_or(m.metric.value_or(sweep::Metric::capacity));
    if (!fixed_metric && Flags::given(f.metric_opt))
        metric = sweep::metric_from_name(f.metric);
    const SweepDefaults d = default_experiment(metric);

    sweep::SweepSpec spec;
    spec.metric = metric;
    spec.distributions = m.distributions.empty() ? (m.count ? std::vector{*m.count} : d.distributions)
                                                 : m.distributions;
    spec.variable = Flags::given(f.sweep_var_opt) ? sweep::variable_from_name(f.sweep_var)
                                                  : m.variable.value_or(d.variable);
    spec.grid = Flags::given(f.grid_opt) ? parse_grid_flag(f.grid) : m.grid.value_or(d.grid);
    spec.fixed = c.scenario;
    spec.method = Flags::given(f.method_opt) ? sweep::method_from_name(f.method)
                                             : m.method.value_or(sweep::MethodChoice::all);
    spec.tol = c.tol;
    spec.include_empty_atom = c.include_empty_atom.value_or(false);
    spec.capacity_units = c.capacity_units;
    spec.mc = {c.trials, c.seed};
    spec.kappa = m.kappa.value_or(2.0);
    spec.workers = c.workers;
    emit(f, sweep::run(spec));
    return 0;
}

int cmd_mc(const Flags& f)
{
    const Manifest m = load(f);
    const Common c = resolve_common(m, f);
    mc::TrialConfig cfg;
    cfg.scenario = c.scenario;
    cfg.n_trials = c.trials;
    cfg.seed = c.seed;
    cfg.workers = c.workers;
    cfg.include_empty_atom = c.include_empty_atom.value_or(true);

    std::optional<std::vector<double>> threshold_probs;
    if (m.threshold)
        threshold_probs = m.threshold->probs;
    if (Flags::given(f.users_opt) || Flags::given(f.q_opt)) {
        if (!Flags::given(f.users_opt) || !Flags::given(f.q_opt))
            throw validation_error("threshold", "--threshold-users and --threshold-q go together");
        if (f.threshold_users < 1)
            throw validation_error("threshold-users", "need at least one user");
        threshold_probs = std::vector<double>(f.threshold_users, success_prob(f.threshold_q));
    }

    mc::McReport r;
    if (threshold_probs) {
        r = mc::run_threshold_mode(*threshold_probs, cfg);
    } else {
        cfg.scenario.count = m.count ? m.count->resolve() : UserCountDistribution::poisson(4.0);
        r = mc::run(cfg);
    }

    const double cap_scale = c.capacity_units == RateUnits::bits ? 1.0 / std::numbers::ln2 : 1.0;
    Table t;
    t.header = {"quantity", "index", "x", "value", "std_err"};
    t.rows.push_back({std::string("outage"), {}, {}, r.outage.value, *r.outage.std_err});
    t.rows.push_back({std::string("capacity"), {}, {}, r.capacity.value * cap_scale, *r.capacity.std_err * cap_scale});
    t.rows.push_back({std::string("ber"), {}, {}, r.ber.value, *r.ber.std_err});
    const double n = static_cast<double>(r.n_trials);
    for (std::size_t k = 0; k < r.count_histogram.size(); ++k) {
        const double p = r.count_frequency(k);
        t.rows.push_back({std::string("count_pmf"), static_cast<std::int64_t>(k), {}, p, std::sqrt(p * (1 - p) / n)});
    }
    for (std::size_t i = 0; i < r.gain_cdf.size(); ++i) {
        const auto& g = r.gain_cdf[i];
        t.rows.push_back({std::string("gain_cdf"), static_cast<std::int64_t>(i), g.x, g.empirical, g.std_err});
    }
    for (std::size_t i = 0; i < r.activity.size(); ++i) {
        const auto& a = r.activity[i];
        t.rows.push_back({std::string("activity"), static_cast<std::int64_t>(i), {}, a.rate, a.std_err});
    }
    emit(f, t);
    return 0;
}

int cmd_validate(const Flags& f, const std::string& positional)
{
    Flags g = f;
    if (!positional.empty())
        g.scenario = positional;
    if (g.scenario.empty())
        throw validation_error("scenario", "no scenario file given");
    const Manifest m = load(g);
    const Common c = resolve_common(m, g);
    c.scenario.validate();

    std::ostringstream os;
    os.precision(12);
    const Scenario& s = c.scenario;
    os << "scenario: " << g.scenario << "\n";
    os << "snr: " << s.snr << "\n";
    os << "rate: " << s.rate << " " << to_string(s.rate_units) << "\n";
    os << "ber_model: " << to_string(s.ber_model) << " alpha=" << s.ber_alpha << " eta=" << s.ber_eta << "\n";
    os << "tol: " << c.tol << "\n";

    std::vector<std::pair<std::string, UserCountDistribution>> laws;
    if (m.count)
        laws.emplace_back("count", m.count->resolve());
    if (m.threshold)
        laws.emplace_back("threshold", UserCountDistribution::poisson_binomial([&] {
                              std::vector<double> nz;
                              for (double p : m.threshold->probs)
                                  if (p > 0.0)
                                      nz.push_back(p);
                              if (nz.empty())
                                  throw validation_error("threshold.probs", "no user can ever be active");
                              return nz;
                          }()));
    for (std::size_t i = 0; i < m.distributions.size(); ++i) {
        const auto& t = m.distributions[i];
        // templates with open parameters are checked at their first grid point
        try {
            laws.emplace_back("distributions[" + std::to_string(i) + "]", t.resolve());
        } catch (const validation_error&) {
            if (m.grid && !m.grid->empty())
                laws.emplace_back("distributions[" + std::to_string(i) + "]",
                                  t.resolve(m.variable.value_or(sweep::Variable::lambda), m.grid->front()));
            else
                throw;
        }
    }
    for (const auto& [where, d] : laws) {
        const Moments mo = moments(d);
        os << where << ": " << d.describe() << "\n";
        os << "  mean=" << mo.mean << " variance=" << mo.variance << " pr_empty=" << pgf(d, 0.0) << "\n";
        if (mo.mean >= 3.0) {
            const ScalingConditionRow sc = scaling_condition(d);
            os << "  scaling: empty_mass_loglog=" << sc.empty_mass_loglog
               << " relative_variance=" << sc.relative_variance << "\n";
        } else {
            os << "  scaling: n/a (mean < 3)\n";
        }
    }
    if (m.metric) {
        os << "sweep: metric=" << sweep::to_string(*m.metric);
        if (m.variable)
            os << " sweep_var=" << sweep::to_string(*m.variable);
        if (m.grid)
            os << " grid_points=" << m.grid->size();
        os << "\n";
        if (m.grid)
            sweep::check_grid(*m.grid);
    }
    os << "valid\n";
    if (g.out == "-") {
        std::cout << os.str();
    } else {
        std::ofstream out(g.out);
        out << os.str();
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mudkit: multi-user diversity metrics with a random number of active users"};
    app.require_subcommand(1);

    Flags f;
    std::string positional;

    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a metric over a parameter grid (CSV)");
    add_common(sweep_cmd, f);
    add_sweep_flags(sweep_cmd, f, true);

    auto* validate_cmd = app.add_subcommand("validate", "check a scenario manifest and print diagnostics");
    add_common(validate_cmd, f);
    validate_cmd->add_option("file", positional, "scenario manifest");

    auto* ordering_cmd = app.add_subcommand("ordering", "Laplace-order checks between consecutive count laws");
    add_common(ordering_cmd, f);
    add_sweep_flags(ordering_cmd, f, false);

    auto* lecam_cmd = app.add_subcommand("lecam", "Poisson-binomial vs Poisson distance and capacity gap");
    add_common(lecam_cmd, f);
    add_sweep_flags(lecam_cmd, f, false);

    auto* mc_cmd = app.add_subcommand("mc", "Monte-Carlo simulation of the selection procedure");
    add_common(mc_cmd, f);
    f.users_opt.push_back(mc_cmd->add_option("--threshold-users", f.threshold_users, "threshold mode: number of users L"));
    f.q_opt.push_back(mc_cmd->add_option("--threshold-q", f.threshold_q, "threshold mode: interference threshold Q"));

    auto* diag_cmd = app.add_subcommand("diag", "asymptotic diagnostics");
    diag_cmd->require_subcommand(1);
    auto* diag_scaling = diag_cmd->add_subcommand("scaling", "capacity scaling-law residuals");
    auto* diag_jensen = diag_cmd->add_subcommand("jensen", "Jensen gaps and tightness residuals");
    auto* diag_regvar = diag_cmd->add_subcommand("regvar", "regular-variation exponent estimates");
    for (auto* d : {diag_scaling, diag_jensen, diag_regvar}) {
        add_common(d, f);
        add_sweep_flags(d, f, false);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sweep_cmd->parsed())
            return cmd_sweep(f, std::nullopt);
        if (ordering_cmd->parsed())
            return cmd_sweep(f, sweep::Metric::ordering);
        if (lecam_cmd->parsed())
            return cmd_sweep(f, sweep::Metric::lecam);
        if (diag_scaling->parsed())
            return cmd_sweep(f, sweep::Metric::scaling);
        if (diag_jensen->parsed())
            return cmd_sweep(f, sweep::Metric::jensen);
        if (diag_regvar->parsed())
            return cmd_sweep(f, sweep::Metric::regvar);
        if (mc_cmd->parsed())
            return cmd_mc(f);
        if (validate_cmd->parsed())
            return cmd_validate(f, positional);
    } catch (const mudkit::validation_error& e) {
        std::cerr << "mudkit: invalid input: " << e.what() << "\n";
        return 2;
    } catch (const mudkit::domain_error& e) {
        std::cerr << "mudkit: invalid input: " << e.what() << "\n";
        return 2;
    } catch (const mudkit::convergence_error& e) {
        std::cerr << "mudkit: numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "mudkit: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
