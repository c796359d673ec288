#ifndef CASCADE_LAB_IO_HPP
#define CASCADE_LAB_IO_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade_lab/criteria.hpp"
#include "cascade_lab/errors.hpp"
#include "cascade_lab/tree_words.hpp"
#include "cascade_lab/weights.hpp"

namespace cascade_lab {

/// Malformed or inconsistent experiment configuration.
struct ConfigError : ArgumentError {
    using ArgumentError::ArgumentError;
};

namespace io {

using nlohmann::json;

inline const std::vector<std::string>& all_checks() {
    static const std::vector<std::string> checks{"identity_33", "epsilon_35", "prop31", "cor34", "lemma41", "bound_chain", "necessity"};
    return checks;
}

/// Every knob of every subcommand. Defaults describe a small verifiable
/// instance: m = 2, k = 3 with the two_point(1/2, 3/2, 1/2) law.
struct ExperimentConfig {
    TreeShape shape{2, 3};
    BaseMeasure measure = BaseMeasure::uniform(TreeShape(2, 3));
    WeightModel model = WeightModel::homogeneous(WeightLaw::two_point(Rational(1, 2), Rational(3, 2), Rational(1, 2)));
    std::vector<double> q{2.0};
    int k_min = 1;
    int k_max = 3;
    std::size_t trials = 10000;
    std::uint64_t seed = 1;
    std::uint64_t cap = kDefaultOutcomeCap;
    int threads = 0;
    std::string engine = "auto";
    std::string format = "csv";
    std::string out;
    double delta = 0.01;
    std::vector<double> epsilons{0.25, 0.5, 0.75};
    std::vector<double> lambdas{0.3, 0.6, 0.9};
    std::vector<int> ns{1, 2, 3};
    std::vector<std::string> checks = all_checks();
    int class_k = 2;       // tree depth for the class-by-class checks
    int census_k = 12;     // tree depth for the weighted class-count sums
    int necessity_k = 60;  // depth range for the necessity check
    bool marked = false;   // orbits: also list marked classes
    double perturb_rhs = 0;
};

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items())
        if (!ok.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
}

inline std::string shortest(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

/// Strings are parsed exactly ("3/10", "0.35"); JSON numbers are read as the
/// shortest decimal that round-trips their double value.
inline Rational rational_from(const json& j, const std::string& where) {
    try {
        if (j.is_string()) return parse_rational(j.get<std::string>());
        if (j.is_number_integer()) return Rational(j.get<long long>());
        if (j.is_number()) return parse_rational(shortest(j.get<double>()));
    } catch (const ArgumentError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": expected a number or a rational string such as \"3/10\"");
}

inline std::vector<Rational> rationals_from(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array");
    std::vector<Rational> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(rational_from(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

inline json rationals_to(const std::vector<Rational>& v) {
    json a = json::array();
    for (const auto& r : v) a.push_back(to_string(r));
    return a;
}

template <class T>
T get_as(const json& obj, const char* key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": missing or of the wrong type");
    }
}

template <class T>
void read_optional(const json& obj, const char* key, T& target, const std::string& where) {
    if (obj.contains(key)) target = get_as<T>(obj, key, where);
}

inline Word word_from(const std::string& s, const std::string& where) {
    try {
        return Word::parse(s);
    } catch (const ArgumentError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

} // namespace detail

inline WeightLaw law_from_json(const json& j, const std::string& where = "law") {
    if (!j.is_object() || !j.contains("type")) throw ConfigError(where + ": expected an object with a \"type\" field");
    const auto type = detail::get_as<std::string>(j, "type", where);
    try {
        if (type == "constant") {
            detail::reject_unknown(j, {"type"}, where);
            return WeightLaw::constant();
        }
        if (type == "two_point") {
            detail::reject_unknown(j, {"type", "a", "b", "p"}, where);
            return WeightLaw::two_point(detail::rational_from(j.at("a"), where + ".a"), detail::rational_from(j.at("b"), where + ".b"),
                                        detail::rational_from(j.at("p"), where + ".p"));
        }
        if (type == "discrete") {
            detail::reject_unknown(j, {"type", "values", "probs"}, where);
            return WeightLaw::discrete(detail::rationals_from(j.at("values"), where + ".values"),
                                       detail::rationals_from(j.at("probs"), where + ".probs"));
        }
        if (type == "lognormal") {
            detail::reject_unknown(j, {"type", "sigma"}, where);
            return WeightLaw::lognormal(detail::get_as<double>(j, "sigma", where));
        }
    } catch (const json::exception&) {
        throw ConfigError(where + ": missing field for law type '" + type + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const ArgumentError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown law type '" + type + "' (expected constant, two_point, discrete or lognormal)");
}

inline json law_to_json(const WeightLaw& law) {
    switch (law.type()) {
    case WeightLaw::Type::constant:
        return {{"type", "constant"}};
    case WeightLaw::Type::two_point:
        return {{"type", "two_point"},
                {"a", to_string(law.raw_values()[0])},
                {"b", to_string(law.raw_values()[1])},
                {"p", to_string(law.raw_probs()[0])}};
    case WeightLaw::Type::discrete:
        return {{"type", "discrete"}, {"values", detail::rationals_to(law.raw_values())}, {"probs", detail::rationals_to(law.raw_probs())}};
    case WeightLaw::Type::lognormal:
        return {{"type", "lognormal"}, {"sigma", law.sigma()}};
    }
    return {};
}

inline WeightModel model_from_json(const json& j, const std::string& where = "model") {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const auto assignment = detail::get_as<std::string>(j, "assignment", where);
    auto laws_from = [&](const json& arr) {
        if (!arr.is_array() || arr.empty()) throw ConfigError(where + ".laws: expected a nonempty array");
        std::vector<WeightLaw> laws;
        for (std::size_t i = 0; i < arr.size(); ++i) laws.push_back(law_from_json(arr[i], where + ".laws[" + std::to_string(i) + "]"));
        return laws;
    };
    if (!j.contains("laws")) throw ConfigError(where + ": missing \"laws\"");
    try {
        if (assignment == "homogeneous") {
            detail::reject_unknown(j, {"assignment", "laws"}, where);
            auto laws = laws_from(j.at("laws"));
            if (laws.size() != 1) throw ConfigError(where + ": homogeneous model takes exactly one law");
            return WeightModel::homogeneous(laws.front());
        }
        if (assignment == "per_depth") {
            detail::reject_unknown(j, {"assignment", "laws"}, where);
            return WeightModel::per_depth(laws_from(j.at("laws")));
        }
        if (assignment == "per_vertex") {
            detail::reject_unknown(j, {"assignment", "laws", "rule", "default"}, where);
            std::map<Word, std::size_t> table;
            if (j.contains("rule")) {
                if (!j.at("rule").is_object()) throw ConfigError(where + ".rule: expected an object mapping words to law indices");
                for (const auto& [key, value] : j.at("rule").items()) {
                    if (!value.is_number_unsigned()) throw ConfigError(where + ".rule." + key + ": expected a law index");
                    table[detail::word_from(key, where + ".rule")] = value.get<std::size_t>();
                }
            }
            std::size_t def = 0;
            detail::read_optional(j, "default", def, where);
            return WeightModel::per_vertex(laws_from(j.at("laws")), std::move(table), def);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const ArgumentError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown assignment '" + assignment + "' (expected homogeneous, per_depth or per_vertex)");
}

inline json model_to_json(const WeightModel& model) {
    json laws = json::array();
    for (const auto& l : model.laws()) laws.push_back(law_to_json(l));
    switch (model.assignment()) {
    case WeightModel::Assignment::homogeneous:
        return {{"assignment", "homogeneous"}, {"laws", laws}};
    case WeightModel::Assignment::per_depth:
        return {{"assignment", "per_depth"}, {"laws", laws}};
    case WeightModel::Assignment::per_vertex: {
        json rule = json::object();
        for (const auto& [w, idx] : model.table()) rule[w.to_string()] = idx;
        return {{"assignment", "per_vertex"}, {"laws", laws}, {"rule", rule}, {"default", model.default_index()}};
    }
    }
    return {};
}

inline BaseMeasure measure_from_json(const json& j, const TreeShape& shape, const std::string& where = "measure") {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const auto kind = detail::get_as<std::string>(j, "kind", where);
    try {
        if (kind == "uniform") {
            detail::reject_unknown(j, {"kind"}, where);
            return BaseMeasure::uniform(shape);
        }
        if (kind == "per_depth") {
            detail::reject_unknown(j, {"kind", "splits"}, where);
            const json& arr = j.at("splits");
            if (!arr.is_array()) throw ConfigError(where + ".splits: expected an array of splits");
            std::vector<BaseMeasure::Split> splits;
            for (std::size_t i = 0; i < arr.size(); ++i)
                splits.push_back(detail::rationals_from(arr[i], where + ".splits[" + std::to_string(i) + "]"));
            return BaseMeasure::per_depth(shape, std::move(splits));
        }
        if (kind == "per_vertex") {
            detail::reject_unknown(j, {"kind", "splits"}, where);
            const json& obj = j.at("splits");
            if (!obj.is_object()) throw ConfigError(where + ".splits: expected an object keyed by vertex word");
            std::map<Word, BaseMeasure::Split> table;
            for (const auto& [key, value] : obj.items())
                table[detail::word_from(key, where + ".splits")] = detail::rationals_from(value, where + ".splits." + key);
            return BaseMeasure::per_vertex(shape, std::move(table));
        }
    } catch (const json::exception&) {
        throw ConfigError(where + ": missing \"splits\"");
    } catch (const ConfigError&) {
        throw;
    } catch (const ArgumentError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown kind '" + kind + "' (expected uniform, per_depth or per_vertex)");
}

inline json measure_to_json(const BaseMeasure& mu) {
    switch (mu.kind()) {
    case BaseMeasure::Kind::uniform:
        return {{"kind", "uniform"}};
    case BaseMeasure::Kind::per_depth: {
        json splits = json::array();
        for (const auto& s : mu.depth_splits()) splits.push_back(detail::rationals_to(s));
        return {{"kind", "per_depth"}, {"splits", splits}};
    }
    case BaseMeasure::Kind::per_vertex: {
        json splits = json::object();
        for (const auto& [w, s] : mu.vertex_splits()) splits[w.to_string()] = detail::rationals_to(s);
        return {{"kind", "per_vertex"}, {"splits", splits}};
    }
    }
    return {};
}

/// Same split rule on a tree of another depth.
inline BaseMeasure reshape(const BaseMeasure& mu, int k) {
    TreeShape shape(mu.shape().m, k);
    switch (mu.kind()) {
    case BaseMeasure::Kind::uniform:
        return BaseMeasure::uniform(shape);
    case BaseMeasure::Kind::per_depth:
        return BaseMeasure::per_depth(shape, mu.depth_splits());
    case BaseMeasure::Kind::per_vertex: {
        std::map<Word, BaseMeasure::Split> table;
        for (const auto& [w, s] : mu.vertex_splits())
            if (static_cast<int>(w.size()) < k) table.emplace(w, s);
        return BaseMeasure::per_vertex(shape, std::move(table));
    }
    }
    return BaseMeasure::uniform(shape);
}

inline void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (c.q.empty()) fail("q: at least one moment order is required");
    for (double q : c.q)
        if (!(q > 0) || !std::isfinite(q)) fail("q: every order must be a finite number > 0 (got " + detail::shortest(q) + ")");
    if (c.k_min < 1 || c.k_max < c.k_min || c.k_max > c.shape.k)
        fail("k_min/k_max: need 1 <= k_min <= k_max <= shape.k (got " + std::to_string(c.k_min) + ".." + std::to_string(c.k_max) +
             " with shape.k = " + std::to_string(c.shape.k) + ")");
    if (c.trials < 2) fail("trials: need at least 2");
    if (c.cap == 0) fail("cap: must be positive");
    if (c.threads < 0) fail("threads: must be >= 0");
    static const std::set<std::string> engines{"auto", "mc", "exact_integer", "exact_discrete"};
    if (!engines.count(c.engine)) fail("engine: expected auto, mc, exact_integer or exact_discrete (got '" + c.engine + "')");
    if (c.format != "csv" && c.format != "json") fail("format: expected csv or json (got '" + c.format + "')");
    if (!(c.delta > 0 && c.delta < 1)) fail("delta: must lie in (0,1)");
    for (double e : c.epsilons)
        if (!(e >= 0 && e <= 1)) fail("epsilons: every value must lie in [0,1]");
    for (double l : c.lambdas)
        if (!(l > 0 && l < 1)) fail("lambdas: every value must lie in (0,1)");
    for (int n : c.ns)
        if (n < 1 || n > 8) fail("ns: tuple sizes must lie in 1..8");
    for (const auto& ch : c.checks)
        if (std::find(all_checks().begin(), all_checks().end(), ch) == all_checks().end())
            fail("checks: unknown check '" + ch + "'");
    if (c.class_k < 1 || c.class_k > c.shape.k) fail("class_k: must lie in 1..shape.k");
    if (c.census_k < 1) fail("census_k: must be >= 1");
    if (c.necessity_k < 2) fail("necessity_k: must be >= 2");
    if (!std::isfinite(c.perturb_rhs) || c.perturb_rhs <= -1) fail("perturb_rhs: must be a finite number > -1");
    try {
        c.model.validate(c.shape);
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

inline ExperimentConfig config_from_json(const json& j) {
    detail::reject_unknown(j,
                           {"shape", "measure", "model", "q", "k_min", "k_max", "trials", "seed", "cap", "threads", "engine", "format", "out",
                            "delta", "epsilons", "lambdas", "ns", "checks", "class_k", "census_k", "necessity_k", "marked", "perturb_rhs"},
                           "config");
    ExperimentConfig c;
    if (j.contains("shape")) {
        const json& s = j.at("shape");
        detail::reject_unknown(s, {"m", "k"}, "config.shape");
        try {
            c.shape = TreeShape(detail::get_as<int>(s, "m", "config.shape"), detail::get_as<int>(s, "k", "config.shape"));
        } catch (const ConfigError&) {
            throw;
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("config.shape: ") + e.what());
        }
        c.k_max = c.shape.k;
    }
    c.measure = j.contains("measure") ? measure_from_json(j.at("measure"), c.shape, "config.measure") : BaseMeasure::uniform(c.shape);
    if (j.contains("model")) c.model = model_from_json(j.at("model"), "config.model");
    if (j.contains("q")) {
        const json& q = j.at("q");
        if (q.is_number()) {
            c.q = {q.get<double>()};
        } else {
            c.q = detail::get_as<std::vector<double>>(j, "q", "config");
        }
    }
    detail::read_optional(j, "k_min", c.k_min, "config");
    detail::read_optional(j, "k_max", c.k_max, "config");
    detail::read_optional(j, "trials", c.trials, "config");
    detail::read_optional(j, "seed", c.seed, "config");
    detail::read_optional(j, "cap", c.cap, "config");
    detail::read_optional(j, "threads", c.threads, "config");
    detail::read_optional(j, "engine", c.engine, "config");
    detail::read_optional(j, "format", c.format, "config");
    detail::read_optional(j, "out", c.out, "config");
    detail::read_optional(j, "delta", c.delta, "config");
    detail::read_optional(j, "epsilons", c.epsilons, "config");
    detail::read_optional(j, "lambdas", c.lambdas, "config");
    detail::read_optional(j, "ns", c.ns, "config");
    detail::read_optional(j, "checks", c.checks, "config");
    detail::read_optional(j, "class_k", c.class_k, "config");
    detail::read_optional(j, "census_k", c.census_k, "config");
    detail::read_optional(j, "necessity_k", c.necessity_k, "config");
    detail::read_optional(j, "marked", c.marked, "config");
    detail::read_optional(j, "perturb_rhs", c.perturb_rhs, "config");
    if (!j.contains("class_k")) c.class_k = std::min(c.class_k, c.shape.k);
    validate(c);
    return c;
}

inline json config_to_json(const ExperimentConfig& c) {
    return {{"shape", {{"m", c.shape.m}, {"k", c.shape.k}}},
            {"measure", measure_to_json(c.measure)},
            {"model", model_to_json(c.model)},
            {"q", c.q},
            {"k_min", c.k_min},
            {"k_max", c.k_max},
            {"trials", c.trials},
            {"seed", c.seed},
            {"cap", c.cap},
            {"threads", c.threads},
            {"engine", c.engine},
            {"format", c.format},
            {"out", c.out},
            {"delta", c.delta},
            {"epsilons", c.epsilons},
            {"lambdas", c.lambdas},
            {"ns", c.ns},
            {"checks", c.checks},
            {"class_k", c.class_k},
            {"census_k", c.census_k},
            {"necessity_k", c.necessity_k},
            {"marked", c.marked},
            {"perturb_rhs", c.perturb_rhs}};
}

inline ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Output

/// Minimal CSV writer: '.' decimals via shortest round-trip formatting and
/// LF line endings regardless of locale.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { line(header); }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw StateError("csv row has the wrong number of cells");
        line(cells);
    }

    const std::string& str() const noexcept { return text_; }

    static std::string num(double x) { return detail::shortest(x); }
    static std::string num(std::uint64_t x) { return std::to_string(x); }
    static std::string num(int x) { return std::to_string(x); }

private:
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char ch : s) {
            if (ch == '"') out += '"';
            out += ch;
        }
        return out + "\"";
    }

    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + escape(cells[i]);
        text_ += '\n';
    }

    std::size_t columns_;
    std::string text_;
};

inline std::string mode_of(const CheckRow& r) { return r.exact ? "exact" : "float"; }

inline json value_to_json(const MomentValue& v) {
    json j = {{"value", v.value}};
    if (v.is_exact()) j["exact"] = to_string(*v.exact);
    return j;
}

inline json report_to_json(const VerificationReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"instance", row.instance},
                        {"lhs", value_to_json(row.lhs)},
                        {"rhs", value_to_json(row.rhs)},
                        {"relation", row.relation == Relation::eq ? "eq" : "le"},
                        {"margin", row.margin},
                        {"mode", mode_of(row)},
                        {"pass", row.pass}});
    json j = {{"check", r.check}, {"description", r.description}, {"pass", r.pass()}, {"rows", rows}, {"notes", r.notes}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

inline void append_report_csv(CsvWriter& w, const VerificationReport& r) {
    for (const auto& row : r.rows)
        w.row({r.check, row.instance, CsvWriter::num(row.lhs.value), CsvWriter::num(row.rhs.value), CsvWriter::num(row.margin), mode_of(row),
               row.pass ? "true" : "false"});
    if (!r.error.empty()) w.row({r.check, "error: " + r.error, "", "", "", "", "false"});
}

inline std::vector<std::string> report_csv_header() { return {"check", "instance", "lhs", "rhs", "margin", "mode", "pass"}; }

} // namespace io
} // namespace cascade_lab

#endif // CASCADE_LAB_IO_HPP
