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

#include "scenario_file.hpp"

#include <mudkit/csv.hpp>
#include <mudkit/sweep.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace mudkit;

namespace {

std::string csv_of(const Table& t)
{
    std::ostringstream os;
    write_csv(os, t);
    return os.str();
}

sweep::CountTemplate law(CountKind kind, std::optional<double> success = std::nullopt)
{
    sweep::CountTemplate t;
    t.kind = kind;
    t.success = success;
    return t;
}

std::string field_of_manifest(const std::string& text)
{
    try {
        cli::parse_manifest(text);
    } catch (const validation_error& e) {
        return e.field();
    }
    return "none";
}

std::string message_of_manifest(const std::string& text)
{
    try {
        cli::parse_manifest(text);
    } catch (const validation_error& e) {
        return e.what();
    }
    return "";
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "mudkit_cli_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

int run_cli(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + (env.empty() ? "" : " ") + MUDKIT_CLI + std::string(" ") + args;
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Csv, TwelveSignificantDigits)
{
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_EQ(format_double(1.5e-300), "1.5e-300");
    EXPECT_EQ(format_double(123456789012345.0), "1.23456789012e+14");
    EXPECT_EQ(format_double(std::nan("")), "nan");
    EXPECT_EQ(format_double(-INFINITY), "-inf");
}

TEST(Csv, QuotingAndEmptyCells)
{
    Table t;
    t.header = {"a", "b,c"};
    t.rows.push_back({std::string("x\"y"), std::monostate{}});
    t.rows.push_back({std::int64_t{7}, 0.25});
    EXPECT_EQ(csv_of(t), "a,\"b,c\"\n\"x\"\"y\",\n7,0.25\n");
    EXPECT_EQ(t.column("b,c"), 1u);
    EXPECT_THROW(t.column("zzz"), std::out_of_range);
}

TEST(Grid, LinearLogAndValidation)
{
    const auto lin = sweep::make_grid(1.0, 3.0, 5, sweep::Spacing::linear);
    EXPECT_EQ(lin, (std::vector<double>{1.0, 1.5, 2.0, 2.5, 3.0}));
    const auto lg = sweep::make_grid(1.0, 1000.0, 4, sweep::Spacing::log);
    ASSERT_EQ(lg.size(), 4u);
    EXPECT_EQ(lg.front(), 1.0);
    EXPECT_EQ(lg.back(), 1000.0);
    EXPECT_NEAR(lg[1], 10.0, 1e-12);
    EXPECT_THROW(sweep::check_grid({}), validation_error);
    EXPECT_THROW(sweep::check_grid({1.0, 1.0}), validation_error);
    EXPECT_THROW(sweep::check_grid({1.0, 3.0, 2.0}), validation_error);
    EXPECT_NO_THROW(sweep::check_grid({3.0, 2.0, 1.0}));
    EXPECT_THROW(sweep::make_grid(0.0, 10.0, 3, sweep::Spacing::log), validation_error);
}

TEST(Sweep, NamesAndMethodCombinations)
{
    EXPECT_EQ(sweep::metric_from_name("ber"), sweep::Metric::ber);
    EXPECT_EQ(sweep::variable_from_name("rho"), sweep::Variable::rho);
    try {
        sweep::metric_from_name("throughput");
        FAIL();
    } catch (const validation_error& e) {
        EXPECT_EQ(e.field(), "metric");
    }
    try {
        sweep::variable_from_name("snr_db");
        FAIL();
    } catch (const validation_error& e) {
        EXPECT_EQ(e.field(), "sweep_var");
    }
    sweep::SweepSpec spec;
    spec.metric = sweep::Metric::ordering;
    spec.method = sweep::MethodChoice::monte_carlo;
    EXPECT_THROW(spec.methods(), validation_error);
    spec.metric = sweep::Metric::capacity;
    EXPECT_EQ(spec.methods(), (std::vector<Method>{Method::monte_carlo}));
    spec.method = sweep::MethodChoice::closed_form;
    EXPECT_THROW(spec.methods(), validation_error);
}

TEST(Sweep, CapacityTableInGridOrderForAnyWorkerCount)
{
    sweep::SweepSpec spec;
    spec.metric = sweep::Metric::capacity;
    spec.method = sweep::MethodChoice::quadrature;
    spec.distributions = {law(CountKind::poisson), law(CountKind::binomial, 0.5)};
    spec.grid = {2.0, 4.0, 8.0};
    const auto one = sweep::run(spec);
    EXPECT_EQ(one.header, (std::vector<std::string>{"distribution", "lambda", "quadrature"}));
    ASSERT_EQ(one.rows.size(), 6u);
    EXPECT_EQ(std::get<std::string>(one.rows[0][0]), "poisson");
    EXPECT_EQ(std::get<double>(one.rows[2][1]), 8.0);
    EXPECT_EQ(std::get<std::string>(one.rows[3][0]), "binomial(p=0.5)");
    Scenario s;
    s.count = UserCountDistribution::poisson(4.0);
    EXPECT_NEAR(std::get<double>(one.rows[1][2]), ergodic_capacity(s).value, 1e-12);
    spec.workers = 4;
    EXPECT_EQ(csv_of(one), csv_of(sweep::run(spec)));
    // capacity in bits
    spec.capacity_units = RateUnits::bits;
    const auto bits = sweep::run(spec);
    EXPECT_NEAR(std::get<double>(bits.rows[1][2]), ergodic_capacity(s).value / std::log(2.0), 1e-12);
}

TEST(Sweep, MonteCarloColumnsAreReproducible)
{
    sweep::SweepSpec spec;
    spec.metric = sweep::Metric::outage;
    spec.distributions = {law(CountKind::poisson)};
    spec.grid = {1.0, 3.0};
    spec.mc.trials = 20'000;
    spec.mc.seed = 4;
    const auto a = sweep::run(spec);
    EXPECT_EQ(a.header, (std::vector<std::string>{"distribution", "lambda", "closed_form", "monte_carlo",
                                                  "monte_carlo_std_err"}));
    spec.workers = 3;
    EXPECT_EQ(csv_of(a), csv_of(sweep::run(spec)));
}

TEST(Sweep, OrderingRowsFlagMetricOrder)
{
    sweep::SweepSpec spec;
    spec.metric = sweep::Metric::ordering;
    spec.distributions = {law(CountKind::negative_binomial, 0.5), law(CountKind::poisson),
                          law(CountKind::binomial, 0.5)};
    spec.grid = {2.0, 8.0};
    const auto t = sweep::run(spec);
    ASSERT_EQ(t.rows.size(), 4u);
    const auto holds = t.column("lt_holds");
    const auto ordered = t.column("metrics_ordered");
    for (const auto& row : t.rows) {
        EXPECT_EQ(std::get<std::int64_t>(row[holds]), 1);
        EXPECT_EQ(std::get<std::int64_t>(row[ordered]), 1);
    }
    // reversed pair fails with a witness
    spec.distributions = {law(CountKind::binomial, 0.5), law(CountKind::negative_binomial, 0.5)};
    const auto r = sweep::run(spec);
    EXPECT_EQ(std::get<std::int64_t>(r.rows[0][holds]), 0);
    EXPECT_TRUE(std::holds_alternative<double>(r.rows[0][t.column("witness_z")]));
}

TEST(Sweep, RejectsBadSpecs)
{
    sweep::SweepSpec spec;
    spec.distributions = {law(CountKind::poisson)};
    spec.grid = {};
    EXPECT_THROW(sweep::run(spec), validation_error);
    spec.grid = {1.0};
    spec.tol = 0.0;
    EXPECT_THROW(sweep::run(spec), validation_error);
    spec.tol = 1e-9;
    spec.distributions = {law(CountKind::binomial)}; // no p
    EXPECT_THROW(sweep::run(spec), validation_error);
    spec.distributions.clear();
    EXPECT_THROW(sweep::run(spec), validation_error);
}

TEST(Manifest, ParsesFullDocument)
{
    const auto m = cli::parse_manifest(R"({
        "count": {"kind": "binomial", "L": 8, "p": 0.5},
        "snr": 20, "rate": 2, "rate_units": "nats", "ber_model": "q", "alpha": 1, "eta": 2,
        "include_empty_atom": true, "tol": 1e-10,
        "sweep": {"metric": "ber", "sweep_var": "rho", "grid": {"start": 1, "stop": 100, "count": 3, "spacing": "log"}},
        "mc": {"trials": 5000, "seed": 9, "workers": 2}
    })");
    ASSERT_TRUE(m.count.has_value());
    EXPECT_EQ(m.count->resolve().kind(), CountKind::binomial);
    EXPECT_EQ(m.scenario.snr, 20.0);
    EXPECT_EQ(m.scenario.rate_units, RateUnits::nats);
    EXPECT_TRUE(m.rate_units_given);
    EXPECT_EQ(m.scenario.ber_model, BerModel::q_form);
    EXPECT_EQ(*m.include_empty_atom, true);
    EXPECT_EQ(*m.tol, 1e-10);
    EXPECT_EQ(*m.metric, sweep::Metric::ber);
    EXPECT_EQ(*m.variable, sweep::Variable::rho);
    ASSERT_EQ(m.grid->size(), 3u);
    EXPECT_NEAR((*m.grid)[1], 10.0, 1e-12);
    EXPECT_EQ(*m.trials, 5000u);
    EXPECT_EQ(*m.seed, 9u);
    EXPECT_EQ(*m.workers, 2u);
}

TEST(Manifest, ThresholdForms)
{
    const auto a = cli::parse_manifest(R"({"threshold": {"L": 4, "Q": 0.6931471805599453}})");
    ASSERT_TRUE(a.threshold.has_value());
    EXPECT_EQ(a.threshold->probs.size(), 4u);
    EXPECT_NEAR(a.threshold->probs[0], 0.5, 1e-15);
    const auto b = cli::parse_manifest(R"({"threshold": {"probs": [0.9, 0.1]}})");
    EXPECT_EQ(b.threshold->probs, (std::vector<double>{0.9, 0.1}));
    EXPECT_EQ(field_of_manifest(R"({"threshold": {"L": 4}})"), "threshold");
}

TEST(Manifest, ErrorsNameTheOffendingField)
{
    EXPECT_EQ(field_of_manifest(R"({"count": {"kind": "binomial", "L": 8, "p": 1.5}})"), "count.success");
    EXPECT_EQ(field_of_manifest(R"({"count": {"kind": "poisson", "lambda": -1}})"), "count.mean");
    EXPECT_EQ(field_of_manifest(R"({"count": {"kind": "zipf"}})"), "count.kind");
    EXPECT_EQ(field_of_manifest(R"({"snr": "high"})"), "snr");
    EXPECT_EQ(field_of_manifest(R"({"bogus": 1})"), "bogus");
    EXPECT_EQ(field_of_manifest(R"({"sweep": {"metric": "throughput"}})"), "sweep.metric");
    EXPECT_EQ(field_of_manifest(R"({"distributions": [{"kind": "nb", "p": 0.5, "q": 1}]})"),
              "distributions[0].q");
    std::string big = R"({"count": {"kind": "pb", "probs": [)";
    for (int i = 0; i < 100000; ++i)
        big += i ? ",0.001" : "0.001";
    big += "]}}";
    const std::string msg = message_of_manifest(big);
    EXPECT_NE(msg.find("count.probs"), std::string::npos) << msg;
    EXPECT_NE(msg.find("L <= 10000"), std::string::npos) << msg;
}

TEST(Manifest, ParseErrorsReportLineAndColumn)
{
    const std::string msg = message_of_manifest("{\n  \"snr\": 10,\n  \"rate\": ,\n}");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column"), std::string::npos) << msg;
}

TEST(Cli, ExitCodes)
{
    const std::string scen = MUDKIT_SCENARIOS;
    const auto out = scratch("validate.txt");
    EXPECT_EQ(run_cli("validate " + scen + "/binomial_validate.json > " + out.string()), 0);
    EXPECT_NE(slurp(out).find("valid"), std::string::npos);

    const auto bad = scratch("bad.json");
    std::ofstream(bad) << R"({"count": {"kind": "binomial", "L": 8, "p": 1.5}})";
    EXPECT_EQ(run_cli("validate " + bad.string() + " 2> " + out.string()), 2);
    EXPECT_NE(slurp(out).find("count.success"), std::string::npos) << slurp(out);

    EXPECT_EQ(run_cli("validate /nonexistent/scenario.json 2> /dev/null"), 2);
    EXPECT_EQ(run_cli("sweep --metric ordering --method monte_carlo 2> /dev/null"), 2);
    EXPECT_EQ(run_cli("sweep --no-such-flag 2> /dev/null"), 2);
    EXPECT_EQ(run_cli("sweep --grid 1,1 > /dev/null 2>&1"), 2);
}

TEST(Cli, ToleranceFromEnvironmentAndFile)
{
    const std::string scen = MUDKIT_SCENARIOS;
    const auto out = scratch("tol.txt");
    EXPECT_EQ(run_cli("validate " + scen + "/binomial_validate.json > " + out.string(), "MUDKIT_DEFAULT_TOL=1e-6"), 0);
    EXPECT_NE(slurp(out).find("tol: 1e-06"), std::string::npos) << slurp(out);
    const auto file = scratch("tol.json");
    std::ofstream(file) << R"({"count": {"kind": "poisson", "lambda": 2}, "tol": 1e-11})";
    EXPECT_EQ(run_cli("validate " + file.string() + " > " + out.string(), "MUDKIT_DEFAULT_TOL=1e-6"), 0);
    EXPECT_NE(slurp(out).find("tol: 1e-11"), std::string::npos) << slurp(out);
    EXPECT_EQ(run_cli("validate " + file.string() + " > /dev/null 2>&1", "MUDKIT_DEFAULT_TOL=abc"), 2);
}

TEST(Cli, SweepCsvIsStableAcrossRuns)
{
    const std::string scen = MUDKIT_SCENARIOS;
    const auto a = scratch("cap_a.csv");
    const auto b = scratch("cap_b.csv");
    ASSERT_EQ(run_cli("sweep --scenario " + scen + "/capacity_vs_lambda.json --out " + a.string()), 0);
    ASSERT_EQ(run_cli("sweep --scenario " + scen + "/capacity_vs_lambda.json --workers 3 --out " + b.string()), 0);
    const std::string text = slurp(a);
    EXPECT_EQ(text, slurp(b));
    EXPECT_EQ(text.substr(0, text.find('\n')), "distribution,lambda,quadrature");
    // 5 laws × 6 grid points plus the header
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 31);
}

TEST(Cli, MonteCarloBytesIndependentOfWorkers)
{
    const std::string scen = MUDKIT_SCENARIOS;
    const auto a = scratch("mc_a.csv");
    const auto b = scratch("mc_b.csv");
    const std::string base = "mc --scenario " + scen + "/mc_poisson.json --trials 30000 --seed 12 ";
    ASSERT_EQ(run_cli(base + "--workers 1 --out " + a.string()), 0);
    ASSERT_EQ(run_cli(base + "--workers 3 --out " + b.string()), 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_EQ(slurp(a).substr(0, 32), "quantity,index,x,value,std_err\no");
}
