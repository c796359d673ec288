#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cascade_lab/criteria.hpp"
#include "cascade_lab/io.hpp"
#include "cascade_lab/moments.hpp"
#include "cascade_lab/orbits.hpp"

using namespace cascade_lab;
using io::ExperimentConfig;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitResource = 3;

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> engine;
    std::vector<double> q;
    std::optional<int> k;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> cap;
    std::optional<std::string> format;
    std::optional<int> threads;
    std::optional<double> perturb_rhs;
    std::vector<std::string> checks;
    std::vector<int> ns;
};

void add_common_flags(CLI::App& cmd, Overrides& o) {
    cmd.add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    cmd.add_option("--seed", o.seed, "Base seed of the random streams");
    cmd.add_option("--out", o.out, "Directory for output files (default: stdout)");
    cmd.add_option("--engine", o.engine, "Moment engine: auto, mc, exact_integer or exact_discrete");
    cmd.add_option("--q", o.q, "Moment orders, comma separated")->delimiter(',');
    cmd.add_option("--k", o.k, "Tree depth")->check(CLI::Range(1, 100000));
    cmd.add_option("--trials", o.trials, "Monte Carlo trials");
    cmd.add_option("--cap", o.cap, "Outcome-space cap for exact enumeration");
    cmd.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    cmd.add_option("--threads", o.threads, "Worker threads (default: CASCADE_LAB_THREADS or all cores)")->check(CLI::NonNegativeNumber);
    cmd.add_option("--perturb-rhs", o.perturb_rhs, "Test hook: scale every right-hand side by 1 + x")->group("");
}

ExperimentConfig resolve_config(const Overrides& o) {
    ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : io::load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out = *o.out;
    if (o.engine) c.engine = *o.engine;
    if (!o.q.empty()) c.q = o.q;
    if (o.k) {
        c.shape = TreeShape(c.shape.m, *o.k);
        c.measure = io::reshape(c.measure, *o.k);
        c.k_max = *o.k;
        c.k_min = std::min(c.k_min, c.k_max);
        c.class_k = std::min(c.class_k, *o.k);
    }
    if (o.trials) c.trials = *o.trials;
    if (o.cap) c.cap = *o.cap;
    if (o.format) c.format = *o.format;
    if (o.threads) c.threads = *o.threads;
    if (o.perturb_rhs) c.perturb_rhs = *o.perturb_rhs;
    if (!o.checks.empty()) c.checks = o.checks;
    if (!o.ns.empty()) c.ns = o.ns;
    io::validate(c);
    return c;
}

/// A table kept as JSON rows so that both output formats come from one source.
struct Table {
    std::vector<std::string> columns;
    json rows = json::array();

    std::string csv() const {
        io::CsvWriter w(columns);
        for (const auto& r : rows) {
            std::vector<std::string> cells;
            for (const auto& col : columns) {
                const json& v = r.contains(col) ? r.at(col) : json();
                if (v.is_null()) {
                    cells.emplace_back();
                } else if (v.is_string()) {
                    cells.push_back(v.get<std::string>());
                } else if (v.is_boolean()) {
                    cells.emplace_back(v.get<bool>() ? "true" : "false");
                } else if (v.is_number_integer()) {
                    cells.push_back(v.dump());
                } else {
                    cells.push_back(io::CsvWriter::num(v.get<double>()));
                }
            }
            w.row(cells);
        }
        return w.str();
    }
};

void emit(const ExperimentConfig& c, const std::string& name, const std::string& csv_text, const json& doc) {
    std::string text = c.format == "json" ? doc.dump(2) + "\n" : csv_text;
    if (c.out.empty()) {
        std::cout << text << std::flush;
        return;
    }
    std::filesystem::create_directories(c.out);
    auto path = std::filesystem::path(c.out) / (name + (c.format == "json" ? ".json" : ".csv"));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    f << text;
}

void emit_table(const ExperimentConfig& c, const std::string& name, const Table& t) {
    emit(c, name, t.csv(), json{{"command", name}, {"columns", t.columns}, {"rows", t.rows}});
}

// --- simulate ---------------------------------------------------------------

int cmd_simulate(const ExperimentConfig& c) {
    auto rows = simulate_masses(c.model, c.measure, c.k_max, c.trials, c.seed, static_cast<unsigned>(c.threads));
    Table t{{"trial", "level", "Z"}};
    for (std::size_t trial = 0; trial < rows.size(); ++trial)
        for (int l = c.k_min; l <= c.k_max; ++l)
            t.rows.push_back({{"trial", trial}, {"level", l}, {"Z", rows[trial][static_cast<std::size_t>(l - 1)]}});
    emit_table(c, "simulate", t);
    return kExitOk;
}

// --- moments ----------------------------------------------------------------

std::string pick_engine(const ExperimentConfig& c, double q) {
    if (c.engine != "auto") return c.engine;
    if (is_integer_exponent(q)) return "exact_integer";
    return c.model.all_finite_support() ? "exact_discrete" : "mc";
}

int cmd_moments(const ExperimentConfig& c) {
    Table t{{"level", "q", "engine", "value", "stderr"}};
    for (double q : c.q) {
        const std::string chosen = pick_engine(c, q);
        if (chosen == "exact_integer" && !is_integer_exponent(q))
            throw ConfigError("engine exact_integer needs an integer q (got " + io::CsvWriter::num(q) + ")");
        if (chosen == "exact_discrete" && !c.model.all_finite_support())
            throw ConfigError("engine exact_discrete needs finite-support laws; use mc for lognormal weights");
        for (int l = c.k_min; l <= c.k_max; ++l) {
            std::string engine = chosen;
            double value = 0, se = 0;
            if (engine == "exact_integer") {
                int n = static_cast<int>(q);
                value = c.model.all_finite_support() ? to_double(exact_moment_integer<Rational>(c.model, c.measure, n, l))
                                                     : exact_moment_integer<double>(c.model, c.measure, n, l);
            } else if (engine == "exact_discrete") {
                try {
                    value = exact_moment_discrete(c.model, c.measure, q, l, c.cap).value;
                } catch (const ResourceError&) {
                    if (c.engine != "auto") throw;
                    engine = "mc";
                }
            }
            if (engine == "mc") {
                auto mc = mc_moment(c.model, c.measure, q, l, c.trials, c.seed, static_cast<unsigned>(c.threads));
                value = mc.estimate;
                se = mc.stderr_;
            }
            t.rows.push_back({{"level", l}, {"q", q}, {"engine", engine}, {"value", value}, {"stderr", se}});
        }
    }
    emit_table(c, "moments", t);
    return kExitOk;
}

// --- criterion --------------------------------------------------------------

int cmd_criterion(const ExperimentConfig& c) {
    Table t{{"q", "level", "S", "s", "verdict", "c", "lambda"}};
    for (double q : c.q) {
        auto p = criterion_profile(c.model, c.measure, q, c.k_max, c.delta);
        std::optional<GeometricBound> g;
        if (p.verdict == Verdict::satisfied) {
            try {
                g = fit_geometric_bound(p);
            } catch (const StateError&) {
            }
        }
        for (int l = 1; l <= c.k_max; ++l) {
            json row = {{"q", q},
                        {"level", l},
                        {"S", p.S[static_cast<std::size_t>(l - 1)].value},
                        {"s", p.s[static_cast<std::size_t>(l - 1)]},
                        {"verdict", to_string(p.verdict)},
                        {"c", nullptr},
                        {"lambda", nullptr}};
            if (g) {
                row["c"] = g->c;
                row["lambda"] = g->lambda;
            }
            t.rows.push_back(row);
        }
        std::cerr << "q=" << io::CsvWriter::num(q) << " verdict=" << to_string(p.verdict)
                  << " trailing_max=" << io::CsvWriter::num(p.trailing_max) << "\n";
    }
    emit_table(c, "criterion", t);
    return kExitOk;
}

// --- verify -----------------------------------------------------------------

template <class F>
VerificationReport guarded(const std::string& check, const std::string& description, F&& f) {
    try {
        return f();
    } catch (const ResourceError& e) {
        VerificationReport r;
        r.check = check;
        r.description = description;
        r.error = e.what();
        r.resource_error = true;
        return r;
    } catch (const std::exception& e) {
        VerificationReport r;
        r.check = check;
        r.description = description;
        r.error = e.what();
        return r;
    }
}

std::vector<VerificationReport> run_suite(const ExperimentConfig& c) {
    VerifyOptions opt{c.cap, c.perturb_rhs};
    const std::string inst = describe_instance(c.model, c.measure);
    std::vector<VerificationReport> out;
    auto want = [&](const std::string& name) { return std::find(c.checks.begin(), c.checks.end(), name) != c.checks.end(); };

    if (want("identity_33"))
        out.push_back(guarded("identity_33", inst, [&] { return verify_identity_33(c.model, c.measure, c.k_max, opt); }));
    if (want("epsilon_35"))
        for (double e : c.epsilons)
            out.push_back(guarded("epsilon_35", inst, [&] { return verify_epsilon_35(c.model, c.measure, c.k_max, e, opt); }));
    if (want("prop31"))
        for (double q : c.q)
            out.push_back(guarded("prop31", inst, [&] { return verify_prop31_all(c.model, c.measure, q, c.class_k, opt); }));
    if (want("cor34"))
        for (double q : c.q)
            out.push_back(guarded("cor34", inst, [&] { return verify_cor34_all(c.model, c.measure, q, c.class_k, opt); }));
    if (want("lemma41")) {
        std::vector<double> eps;
        for (double e : c.epsilons)
            if (e > 0 && e < 1) eps.push_back(e);
        out.push_back(guarded("lemma41", "census", [&] { return verify_lemma41(TreeShape(c.shape.m, c.census_k), c.ns, c.lambdas, eps, opt); }));
    }
    if (want("bound_chain"))
        for (double q : c.q)
            out.push_back(guarded("bound_chain", inst, [&] {
                BoundOptions b;
                b.trials = c.trials;
                b.seed = c.seed;
                b.threads = static_cast<unsigned>(c.threads);
                b.cap = c.cap;
                b.delta = c.delta;
                b.perturb_rhs = c.perturb_rhs;
                return moment_bound_report(c.model, c.measure, q, c.k_max, b).report;
            }));
    if (want("necessity"))
        for (double q : c.q)
            out.push_back(guarded("necessity", inst, [&] {
                NecessityOptions n;
                n.delta = c.delta;
                auto mu = io::reshape(c.measure, c.necessity_k);
                return necessity_report(necessity_check(c.model, mu, q, c.necessity_k, n), describe_instance(c.model, mu));
            }));
    return out;
}

int cmd_verify(const ExperimentConfig& c) {
    auto reports = run_suite(c);
    io::CsvWriter w(io::report_csv_header());
    json doc = {{"command", "verify"}, {"reports", json::array()}};
    bool failed = false, resource = false;
    for (const auto& r : reports) {
        io::append_report_csv(w, r);
        doc["reports"].push_back(io::report_to_json(r));
        if (!r.pass()) (r.resource_error ? resource : failed) = true;
        std::cerr << r.check << ": " << (r.pass() ? "PASS" : "FAIL") << " rows=" << r.rows.size() << " failures=" << r.failures();
        if (!r.rows.empty()) std::cerr << " min_margin=" << io::CsvWriter::num(r.min_margin());
        if (!r.error.empty()) std::cerr << " error=\"" << r.error << "\"";
        std::cerr << "\n";
    }
    doc["pass"] = !failed && !resource;
    emit(c, "verify", w.str(), doc);
    if (failed) return kExitFailed;
    return resource ? kExitResource : kExitOk;
}

// --- orbits -----------------------------------------------------------------

std::string levels_cell(const std::vector<int>& levels) {
    std::string s;
    for (std::size_t i = 0; i < levels.size(); ++i) s += (i ? "-" : "") + std::to_string(levels[i]);
    return s;
}

int cmd_orbits(const ExperimentConfig& c) {
    Table t{{"n", "levels", "mark_level", "N", "N_plus", "within_factorial_bound"}};
    Table sums{{"n", "lambda", "epsilon", "sum", "bound", "within_bound"}};
    for (int n : c.ns) {
        auto census = class_census(c.shape, n, c.cap);
        const double plain_bound = factorial(n - 1), marked_bound = factorial(n);
        for (const auto& [levels, count] : census.N)
            t.rows.push_back({{"n", n}, {"levels", levels_cell(levels)}, {"mark_level", nullptr}, {"N", count}, {"N_plus", nullptr},
                              {"within_factorial_bound", static_cast<double>(count) <= plain_bound}});
        if (c.marked)
            for (const auto& [key, count] : census.N_plus)
                t.rows.push_back({{"n", n}, {"levels", levels_cell(key.first)}, {"mark_level", key.second}, {"N", nullptr}, {"N_plus", count},
                                  {"within_factorial_bound", static_cast<double>(count) <= marked_bound}});
        for (double lam : c.lambdas) {
            double s = lemma41_sum(census, lam), m = bound_M(lam, n);
            sums.rows.push_back({{"n", n}, {"lambda", lam}, {"epsilon", nullptr}, {"sum", s}, {"bound", m}, {"within_bound", s <= m}});
            for (double e : c.epsilons) {
                if (!(e > 0 && e < 1)) continue;
                double sp = lemma41_sum_plus(census, lam, e), mp = bound_M_plus(lam, e, n);
                sums.rows.push_back({{"n", n}, {"lambda", lam}, {"epsilon", e}, {"sum", sp}, {"bound", mp}, {"within_bound", sp <= mp}});
            }
        }
    }
    emit_table(c, "orbits", t);
    if (c.out.empty()) {
        std::cerr << sums.csv();
    } else {
        ExperimentConfig side = c;
        emit_table(side, "orbits_lemma41", sums);
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random cascade moment laboratory"};
    app.require_subcommand(1);
    Overrides o;
    auto* simulate = app.add_subcommand("simulate", "Per-trial masses Z_l");
    auto* moments = app.add_subcommand("moments", "Moments E(Z_l^q) by the selected engine");
    auto* criterion = app.add_subcommand("criterion", "Level sums S_l, s_l = S_l^(1/l) and the verdict");
    auto* verify = app.add_subcommand("verify", "Run the verification suite");
    auto* orbits = app.add_subcommand("orbits", "Join-class census and the weighted class-count sums");
    for (auto* cmd : {simulate, moments, criterion, verify, orbits}) add_common_flags(*cmd, o);
    verify->add_option("--checks", o.checks, "Subset of checks, comma separated")->delimiter(',');
    orbits->add_option("--n", o.ns, "Tuple sizes, comma separated")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        ExperimentConfig c = resolve_config(o);
        if (simulate->parsed()) return cmd_simulate(c);
        if (moments->parsed()) return cmd_moments(c);
        if (criterion->parsed()) return cmd_criterion(c);
        if (verify->parsed()) return cmd_verify(c);
        if (orbits->parsed()) return cmd_orbits(c);
    } catch (const ResourceError& e) {
        std::cerr << "resource cap: " << e.what() << "\n";
        return kExitResource;
    } catch (const UnsupportedLawError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailed;
    }
    return kExitUsage;
}
