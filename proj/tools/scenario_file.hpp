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

// JSON scenario manifests for the command-line tool. A manifest mirrors the
// library types:
//
//   {
//     "count": {"kind": "binomial", "L": 8, "p": 0.5},
//     "distributions": [{"kind": "nb", "p": 0.5}, {"kind": "poisson"}],
//     "snr": 10, "rate": 1, "rate_units": "bits",
//     "alpha": 0.5, "eta": 1, "ber_model": "exponential",
//     "include_empty_atom": false, "tol": 1e-9,
//     "sweep": {"metric": "capacity", "sweep_var": "lambda",
//               "grid": {"start": 2, "stop": 64, "count": 6, "spacing": "log"},
//               "method": "all", "kappa": 2},
//     "mc": {"trials": 100000, "seed": 1, "workers": 1},
//     "threshold": {"L": 8, "Q": 0.693}
//   }
//
// Every key is optional. Unknown keys are rejected so typos do not pass
// silently.

#include <mudkit/mudkit.hpp>

#include "json.hpp"

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mudkit::cli {

using nlohmann::json;

struct ThresholdSpec {
    std::vector<double> probs;
};

struct Manifest {
    std::optional<sweep::CountTemplate> count;
    std::vector<sweep::CountTemplate> distributions;
    Scenario scenario;
    bool rate_units_given = false;
    std::optional<bool> include_empty_atom;
    std::optional<double> tol;
    std::optional<sweep::Metric> metric;
    std::optional<sweep::Variable> variable;
    std::optional<std::vector<double>> grid;
    std::optional<sweep::MethodChoice> method;
    std::optional<double> kappa;
    std::optional<std::uint64_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<ThresholdSpec> threshold;
};

namespace detail {

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object())
        throw validation_error(where.empty() ? "scenario" : where, "expected a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
        if (!ok.count(key))
            throw validation_error(where.empty() ? key : where + "." + key, "unknown key");
    }
}

inline std::string path(const std::string& where, const std::string& key)
{
    return where.empty() ? key : where + "." + key;
}

inline double number(const json& v, const std::string& field)
{
    if (!v.is_number())
        throw validation_error(field, "expected a number");
    return v.get<double>();
}

inline std::uint64_t count_value(const json& v, const std::string& field)
{
    if (!v.is_number_integer() && !(v.is_number() && std::floor(v.get<double>()) == v.get<double>()))
        throw validation_error(field, "expected an integer");
    const double d = v.get<double>();
    if (!(d >= 0.0))
        throw validation_error(field, "expected a non-negative integer");
    return v.is_number_unsigned() ? v.get<std::uint64_t>() : static_cast<std::uint64_t>(d);
}

inline std::string text(const json& v, const std::string& field)
{
    if (!v.is_string())
        throw validation_error(field, "expected a string");
    return v.get<std::string>();
}

inline std::vector<double> numbers(const json& v, const std::string& field)
{
    if (!v.is_array())
        throw validation_error(field, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

inline CountKind kind_from_name(const std::string& s, const std::string& field)
{
    if (s == "deterministic")
        return CountKind::deterministic;
    if (s == "binomial")
        return CountKind::binomial;
    if (s == "nb" || s == "negative_binomial")
        return CountKind::negative_binomial;
    if (s == "poisson")
        return CountKind::poisson;
    if (s == "pb" || s == "poisson_binomial")
        return CountKind::poisson_binomial;
    throw validation_error(field, "unknown count kind '" + s + "' (deterministic|binomial|nb|poisson|pb)");
}

/// Re-raises a validation error with `where` prefixed to its field.
template <typename F>
auto within(const std::string& where, F&& f)
{
    try {
        return f();
    } catch (const validation_error& e) {
        const std::string msg = e.what();
        const std::string prefix = e.field() + ": ";
        const std::string rest = msg.rfind(prefix, 0) == 0 ? msg.substr(prefix.size()) : msg;
        throw validation_error(path(where, e.field()), rest);
    }
}

} // namespace detail

inline sweep::CountTemplate parse_count(const json& obj, const std::string& where)
{
    using namespace detail;
    check_keys(obj, where,
               {"kind", "L", "trials", "n", "p", "success", "r", "failures", "lambda", "mean", "probs", "spread",
                "label"});
    if (!obj.contains("kind"))
        throw validation_error(path(where, "kind"), "required");
    sweep::CountTemplate t;
    t.kind = kind_from_name(text(obj["kind"], path(where, "kind")), path(where, "kind"));
    for (const char* k : {"L", "trials", "n"}) {
        if (obj.contains(k))
            t.trials = number(obj[k], path(where, k));
    }
    for (const char* k : {"p", "success"}) {
        if (obj.contains(k))
            t.success = number(obj[k], path(where, "success"));
    }
    for (const char* k : {"r", "failures"}) {
        if (obj.contains(k))
            t.failures = number(obj[k], path(where, "failures"));
    }
    for (const char* k : {"lambda", "mean"}) {
        if (obj.contains(k))
            t.mean = number(obj[k], path(where, "lambda"));
    }
    if (obj.contains("probs"))
        t.probs = numbers(obj["probs"], path(where, "probs"));
    if (obj.contains("spread"))
        t.spread = number(obj["spread"], path(where, "spread"));
    if (obj.contains("label"))
        t.label = text(obj["label"], path(where, "label"));
    return t;
}

inline std::vector<double> parse_grid(const json& v, const std::string& field)
{
    using namespace detail;
    if (v.is_array())
        return numbers(v, field);
    check_keys(v, field, {"start", "stop", "count", "spacing"});
    for (const char* k : {"start", "stop", "count"}) {
        if (!v.contains(k))
            throw validation_error(path(field, k), "required");
    }
    sweep::Spacing spacing = sweep::Spacing::linear;
    if (v.contains("spacing")) {
        const std::string s = text(v["spacing"], path(field, "spacing"));
        if (s == "log")
            spacing = sweep::Spacing::log;
        else if (s != "linear")
            throw validation_error(path(field, "spacing"), "expected linear or log");
    }
    return within(field, [&] {
        return sweep::make_grid(number(v["start"], "start"), number(v["stop"], "stop"),
                                static_cast<std::size_t>(count_value(v["count"], "count")), spacing);
    });
}

/// Parses a manifest, with `origin` used in messages (usually the file name).
inline Manifest parse_manifest(const std::string& text_in, const std::string& origin = "scenario")
{
    using namespace detail;
    json doc;
    try {
        doc = json::parse(text_in);
    } catch (const json::parse_error& e) {
        // convert the byte offset into a line/column pair
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text_in.size(); ++i) {
            if (text_in[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw validation_error(origin, "parse error at line " + std::to_string(line) + ", column " +
                                           std::to_string(col) + ": " + e.what());
    }
    check_keys(doc, "",
               {"count", "distributions", "snr", "rate", "rate_units", "alpha", "eta", "ber_model",
                "include_empty_atom", "tol", "sweep", "mc", "threshold", "description"});

    Manifest m;
    if (doc.contains("count"))
        m.count = parse_count(doc["count"], "count");
    if (doc.contains("distributions")) {
        const json& list = doc["distributions"];
        if (!list.is_array())
            throw validation_error("distributions", "expected an array of count laws");
        for (std::size_t i = 0; i < list.size(); ++i)
            m.distributions.push_back(parse_count(list[i], "distributions[" + std::to_string(i) + "]"));
    }
    Scenario& s = m.scenario;
    if (doc.contains("snr"))
        s.snr = number(doc["snr"], "snr");
    if (doc.contains("rate"))
        s.rate = number(doc["rate"], "rate");
    if (doc.contains("rate_units")) {
        const std::string u = text(doc["rate_units"], "rate_units");
        if (u != "bits" && u != "nats")
            throw validation_error("rate_units", "expected bits or nats");
        s.rate_units = u == "bits" ? RateUnits::bits : RateUnits::nats;
        m.rate_units_given = true;
    }
    if (doc.contains("alpha"))
        s.ber_alpha = number(doc["alpha"], "alpha");
    if (doc.contains("eta"))
        s.ber_eta = number(doc["eta"], "eta");
    if (doc.contains("ber_model")) {
        const std::string b = text(doc["ber_model"], "ber_model");
        if (b == "exponential" || b == "exp")
            s.ber_model = BerModel::exponential;
        else if (b == "q" || b == "q_form" || b == "q-form")
            s.ber_model = BerModel::q_form;
        else
            throw validation_error("ber_model", "expected exponential or q");
    }
    if (doc.contains("include_empty_atom")) {
        if (!doc["include_empty_atom"].is_boolean())
            throw validation_error("include_empty_atom", "expected true or false");
        m.include_empty_atom = doc["include_empty_atom"].get<bool>();
    }
    if (doc.contains("tol"))
        m.tol = number(doc["tol"], "tol");

    if (doc.contains("sweep")) {
        const json& sw = doc["sweep"];
        check_keys(sw, "sweep", {"metric", "sweep_var", "grid", "method", "kappa"});
        if (sw.contains("metric"))
            m.metric = within("sweep", [&] { return sweep::metric_from_name(text(sw["metric"], "metric")); });
        if (sw.contains("sweep_var"))
            m.variable = within("sweep", [&] { return sweep::variable_from_name(text(sw["sweep_var"], "sweep_var")); });
        if (sw.contains("grid"))
            m.grid = parse_grid(sw["grid"], "sweep.grid");
        if (sw.contains("method"))
            m.method = within("sweep", [&] { return sweep::method_from_name(text(sw["method"], "method")); });
        if (sw.contains("kappa"))
            m.kappa = number(sw["kappa"], "sweep.kappa");
    }
    if (doc.contains("mc")) {
        const json& mc = doc["mc"];
        check_keys(mc, "mc", {"trials", "seed", "workers"});
        if (mc.contains("trials"))
            m.trials = count_value(mc["trials"], "mc.trials");
        if (mc.contains("seed"))
            m.seed = count_value(mc["seed"], "mc.seed");
        if (mc.contains("workers"))
            m.workers = static_cast<std::size_t>(count_value(mc["workers"], "mc.workers"));
    }
    if (doc.contains("threshold")) {
        const json& th = doc["threshold"];
        check_keys(th, "threshold", {"L", "Q", "probs"});
        ThresholdSpec spec;
        if (th.contains("probs")) {
            spec.probs = numbers(th["probs"], "threshold.probs");
        } else {
            if (!th.contains("L") || !th.contains("Q"))
                throw validation_error("threshold", "give either probs or both L and Q");
            const auto users = count_value(th["L"], "threshold.L");
            const double q = number(th["Q"], "threshold.Q");
            if (users < 1)
                throw validation_error("threshold.L", "need at least one user");
            if (!(q >= 0.0))
                throw validation_error("threshold.Q", "interference threshold must be non-negative");
            spec.probs.assign(users, success_prob(q));
        }
        m.threshold = spec;
    }

    // Resolve fully specified laws now so range errors surface at load time.
    if (m.count)
        within("count", [&] { return m.count->resolve(); });
    return m;
}

inline Manifest load_manifest(const std::string& file)
{
    std::ifstream in(file);
    if (!in)
        throw validation_error("scenario", "cannot open '" + file + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), file);
}

} // namespace mudkit::cli
