// Acceptance suite: one PASS/FAIL line per criterion.
//
// The process exits 0 when every criterion passes or when a failing
// criterion matches its documented known deviation exactly (same subpart,
// same counterexample pattern). Anything else exits 1.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cascade_lab/criteria.hpp"
#include "cascade_lab/moments.hpp"
#include "cascade_lab/orbits.hpp"

using namespace cascade_lab;

namespace {

struct Outcome {
    bool pass = false;
    bool known_deviation = false;
    std::string detail;
};

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

WeightLaw half_three_halves() { return WeightLaw::two_point(Rational(1, 2), Rational(3, 2), Rational(1, 2)); }

WeightModel alternating_model() {
    return WeightModel::per_depth({half_three_halves(), WeightLaw::two_point(Rational(1, 4), Rational(7, 4), Rational(1, 2))});
}

WeightModel mixed_vertex_model() {
    std::map<Word, std::size_t> table{{Word{2}, 1}, {Word{1, 2}, 2}};
    return WeightModel::per_vertex({half_three_halves(),
                                    WeightLaw::discrete({Rational(1, 5), Rational(1), Rational(13, 5)},
                                                        {Rational(1, 2), Rational(1, 4), Rational(1, 4)}),
                                    WeightLaw::two_point(Rational(1, 2), Rational(3), Rational(4, 5))},
                                   table, 0);
}

BaseMeasure skewed(int m, int k) {
    BaseMeasure::Split a, b;
    for (int c = 1; c <= m; ++c) {
        a.push_back(Rational(c, m * (m + 1) / 2));
        b.push_back(Rational(m + 1 - c, m * (m + 1) / 2));
    }
    return BaseMeasure::per_depth(TreeShape(m, k), {a, b});
}

// Test-side oracle: all joint weight outcomes of T_k, Z_k per outcome.
void brute_z(const WeightModel& model, const BaseMeasure& mu, int k, const std::function<void(const Rational&, const Rational&)>& f) {
    std::vector<Word> vertices;
    for (int d = 1; d <= k; ++d)
        for (const auto& w : level_vertices(mu.shape(), d)) vertices.push_back(w);
    std::map<Word, Rational> w;
    std::function<void(std::size_t, Rational)> rec = [&](std::size_t i, Rational prob) {
        if (i == vertices.size()) {
            Rational z = 0;
            for (const auto& leaf : level_vertices(mu.shape(), k)) {
                Rational y = cylinder_mass(mu, leaf);
                for (int d = 1; d <= k; ++d) y *= w.at(curtail(leaf, d));
                z += y;
            }
            f(z, prob);
            return;
        }
        const auto& law = model.law_at(vertices[i]);
        for (std::size_t a = 0; a < law.raw_values().size(); ++a) {
            w[vertices[i]] = law.raw_values()[a];
            rec(i + 1, prob * law.raw_probs()[a]);
        }
    };
    rec(0, Rational(1));
}

double brute_moment(const WeightModel& model, const BaseMeasure& mu, int k, double q) {
    double s = 0;
    brute_z(model, mu, k, [&](const Rational& z, const Rational& p) { s += to_double(p) * std::pow(to_double(z), q); });
    return s;
}

// --- 1 ----------------------------------------------------------------------

Outcome criterion1() {
    auto mu = BaseMeasure::uniform(TreeShape(2, 3));
    auto rep = verify_identity_33(WeightModel::homogeneous(half_three_halves()), mu, 3);
    bool exact = std::all_of(rep.rows.begin(), rep.rows.end(), [](const CheckRow& r) { return r.exact; });
    return {rep.pass() && exact, false,
            std::to_string(rep.rows.size()) + " exact equalities, " + std::to_string(rep.failures()) + " failures"};
}

// --- 2 ----------------------------------------------------------------------

Outcome criterion2() {
    auto mu = BaseMeasure::uniform(TreeShape(2, 3));
    std::size_t rows = 0, failures = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (double eps : {0.25, 0.5, 0.75}) {
        auto rep = verify_epsilon_35(WeightModel::homogeneous(half_three_halves()), mu, 3, eps);
        rows += rep.rows.size();
        failures += rep.failures();
        worst = std::min(worst, rep.min_margin());
    }
    return {failures == 0 && rows > 0, false,
            std::to_string(rows) + " atom rows, " + std::to_string(failures) + " failures, min margin " + fmt(worst)};
}

// --- 3 ----------------------------------------------------------------------

Outcome criterion3() {
    std::size_t rows = 0, failures = 0;
    bool oracle_ok = true;
    std::vector<std::pair<WeightModel, BaseMeasure>> instances{{WeightModel::homogeneous(half_three_halves()), BaseMeasure::uniform(TreeShape(2, 2))},
                                                               {mixed_vertex_model(), skewed(2, 2)}};
    for (const auto& [model, mu] : instances) {
        for (double q : {2.0, 2.5}) {
            auto p = verify_prop31_all(model, mu, q, 2);
            auto c = verify_cor34_all(model, mu, q, 2);
            rows += p.rows.size() + c.rows.size();
            failures += p.failures() + c.failures();
            // Σ over classes of the fractional-branch left sides is E(Z_2^q).
            double total = 0;
            for (const auto& r : c.rows) total += r.lhs.value;
            double want = brute_moment(model, mu, 2, q);
            oracle_ok = oracle_ok && std::abs(total - want) <= 1e-12 * want;
        }
    }
    return {failures == 0 && oracle_ok, false,
            std::to_string(rows) + " class rows (plain and marked), " + std::to_string(failures) + " failures, class sums " +
                (oracle_ok ? "match" : "DIFFER from") + " brute-force E(Z^q)"};
}

// --- 4 ----------------------------------------------------------------------

std::vector<int> first_use_labels(const std::vector<int>& labels) {
    std::map<int, int> renumber;
    std::vector<int> out;
    for (int l : labels) out.push_back(renumber.try_emplace(l, static_cast<int>(renumber.size())).first->second);
    return out;
}

Outcome criterion4() {
    std::vector<TreeShape> shapes{{2, 1}, {2, 2}, {2, 3}, {3, 1}, {3, 2}};
    bool partitions = true;
    for (const auto& s : shapes)
        for (int n = 1; n <= 3; ++n)
            partitions = partitions && first_use_labels(automorphism_orbit_labels(s, n)) == first_use_labels(canonical_orbit_labels(s, n));

    std::mt19937_64 gen(20240611);
    bool multiplicity = true;
    for (int t = 0; t < 10000; ++t) {
        int m = 2 + static_cast<int>(gen() % 3), k = 1 + static_cast<int>(gen() % 6), n = 2 + static_cast<int>(gen() % 5);
        std::vector<Word> entries;
        for (int r = 0; r < n; ++r) {
            Word w;
            for (int d = 0; d < k; ++d) w.push_back(1 + static_cast<int>(gen() % static_cast<unsigned>(m)));
            entries.push_back(w);
        }
        int total = 0;
        for (const auto& [v, mult] : join_set(LeafTuple(TreeShape(m, k), entries))) total += mult;
        multiplicity = multiplicity && total == n - 1;
    }

    // factorial bounds on every instance above
    bool bounds = true, only_n3 = true;
    std::string worst;
    for (const auto& s : shapes)
        for (int n = 1; n <= 3; ++n) {
            auto [maxN, maxNp] = census_maxima(class_census(s, n));
            bool okN = static_cast<double>(maxN) <= factorial(n - 1), okNp = static_cast<double>(maxNp) <= factorial(n);
            if (!okN || !okNp) {
                bounds = false;
                only_n3 = only_n3 && n == 3;
                worst += " m=" + std::to_string(s.m) + ",k=" + std::to_string(s.k) + ",n=" + std::to_string(n) + ": N=" +
                         std::to_string(maxN) + ",N+=" + std::to_string(maxNp) + ";";
            }
        }

    Outcome o;
    o.pass = partitions && multiplicity && bounds;
    o.detail = std::string("partition ") + (partitions ? "matches" : "DIFFERS") + ", join multiplicity " +
               (multiplicity ? "n-1 on 10^4 tuples" : "WRONG") + ", factorial bounds " + (bounds ? "hold" : "exceeded:" + worst);
    // Known deviation: ordered tuples give up to (n-1)!-fold more classes than
    // the factorial bound allows; the first excess appears at n = 3.
    o.known_deviation = partitions && multiplicity && !bounds && only_n3;
    return o;
}

// --- 5 ----------------------------------------------------------------------

Outcome criterion5() {
    const std::vector<double> lambdas{0.3, 0.6, 0.9}, epsilons{0.25, 0.5, 0.75};
    bool below = true, monotone = true;
    double tightest = 0;
    for (int n = 1; n <= 4; ++n) {
        std::vector<double> prev(lambdas.size() * (1 + epsilons.size()), 0.0);
        for (int k = 1; k <= 12; ++k) {
            auto census = class_census(TreeShape(2, k), n);
            std::size_t slot = 0;
            for (double lam : lambdas) {
                std::vector<std::pair<double, double>> pairs{{lemma41_sum(census, lam), bound_M(lam, n)}};
                for (double e : epsilons) pairs.emplace_back(lemma41_sum_plus(census, lam, e), bound_M_plus(lam, e, n));
                for (auto [sum, bound] : pairs) {
                    below = below && sum <= bound;
                    tightest = std::max(tightest, sum / bound);
                    monotone = monotone && sum >= prev[slot] * (1 - 1e-12);
                    prev[slot++] = sum;
                }
            }
        }
    }
    return {below && monotone, false,
            std::string("sums ") + (below ? "<=" : "EXCEED") + " M, M+ (max ratio " + fmt(tightest) + "), " +
                (monotone ? "non-decreasing" : "NOT monotone") + " in k for n<=4, k<=12"};
}

// --- 6 ----------------------------------------------------------------------

std::vector<std::vector<double>> integer_moment_series(const WeightModel& model, const BaseMeasure& mu, int top, int k_max) {
    std::vector<std::vector<double>> out;
    for (int k = 1; k <= k_max; ++k) {
        std::vector<double> row;
        for (const auto& x : integer_moments<Rational>(model, mu, top, k)) row.push_back(to_double(x));
        out.push_back(row);
    }
    return out;
}

double last_half_increase(const std::vector<double>& v, std::size_t from) {
    double runmax = 0, at_from = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        runmax = std::max(runmax, v[i]);
        if (i + 1 == from) at_from = runmax;
    }
    return (runmax - at_from) / at_from;
}

Outcome criterion6() {
    const int K = 200;
    auto model = alternating_model();
    auto mu = BaseMeasure::uniform(TreeShape(2, K));
    auto profile = criterion_profile(model, mu, 2.0, K);
    double smax = *std::max_element(profile.s.begin(), profile.s.end());

    auto mom = integer_moment_series(model, mu, 3, K);
    std::vector<double> z2, upper25;
    for (const auto& row : mom) {
        z2.push_back(row[2]);
        upper25.push_back(std::sqrt(row[2] * row[3]));
    }
    double inc2 = last_half_increase(z2, 100), inc25 = last_half_increase(upper25, 100);

    const int k = 12;
    auto mu12 = BaseMeasure::uniform(TreeShape(2, k));
    double est = 0, se = 0;
    std::string engine;
    try {
        est = exact_moment_discrete(model, mu12, 2.5, k).value;
        engine = "exact_discrete";
    } catch (const ResourceError&) {
        auto mc = mc_moment(model, mu12, 2.5, k, 100000, 12);
        est = mc.estimate;
        se = mc.stderr_;
        engine = "mc";
    }
    const auto& r12 = mom[static_cast<std::size_t>(k - 1)];
    double lo = std::pow(r12[2], 1.25) - 4 * se, hi = std::sqrt(r12[2] * r12[3]) + 4 * se;
    double sup = *std::max_element(upper25.begin(), upper25.end());
    bool consistent = est >= lo && est <= hi && est <= sup + 4 * se;

    bool ok = smax <= 0.9 && inc2 < 0.01 && inc25 < 0.01 && consistent;
    return {ok, false,
            "max s_l " + fmt(smax) + ", E Z^2 running-max increase " + fmt(inc2) + " over k=101..200, q=2.5 " + engine +
                " at k=12: " + fmt(est) + " +/- " + fmt(se) + " in [" + fmt(lo) + ", " + fmt(hi) + "], bracket plateau increase " + fmt(inc25)};
}

// --- 7 ----------------------------------------------------------------------

Outcome criterion7() {
    auto model = WeightModel::homogeneous(WeightLaw::two_point(Rational(1, 2), Rational(17, 5), Rational(24, 29)));
    auto mu = BaseMeasure::uniform(TreeShape(2, 60));
    auto profile = criterion_profile(model, mu, 2.0, 60);
    double e20 = to_double(exact_moment_integer<Rational>(model, mu, 2, 20));
    double e60 = to_double(exact_moment_integer<Rational>(model, mu, 2, 60));
    double ratio = std::pow(e60 / e20, 1.0 / 40);
    bool tuned = std::abs(profile.s.back() - 1.1) < 1e-12;
    return {tuned && ratio >= 1.05, false, "s_l = " + fmt(profile.s.back()) + ", growth ratio over k=20..60 = " + fmt(ratio)};
}

// --- 8 ----------------------------------------------------------------------

Outcome criterion8() {
    std::vector<std::pair<WeightModel, BaseMeasure>> models{
        {WeightModel::homogeneous(half_three_halves()), BaseMeasure::uniform(TreeShape(2, 3))},
        {WeightModel::homogeneous(half_three_halves()), skewed(2, 3)},
        {alternating_model(), skewed(2, 3)},
        {mixed_vertex_model(), skewed(2, 3)},
        {WeightModel::per_depth({WeightLaw::two_point(Rational(1, 4), Rational(7, 4), Rational(1, 2)),
                                 WeightLaw::discrete({Rational(1, 5), Rational(1), Rational(13, 5)}, {Rational(1, 2), Rational(1, 4), Rational(1, 4)}),
                                 half_three_halves()}),
         skewed(2, 3)},
        {WeightModel::homogeneous(half_three_halves()), skewed(3, 2)},
    };
    std::size_t exact_checks = 0, exact_fail = 0;
    for (const auto& [model, mu] : models)
        for (int k = 1; k <= mu.shape().k; ++k)
            for (int n = 1; n <= 3; ++n) {
                auto a = exact_moment_integer<Rational>(model, mu, n, k);
                auto b = exact_moment_discrete(model, mu, n, k);
                ++exact_checks;
                if (!b.is_exact() || *b.exact != a) ++exact_fail;
            }

    std::mt19937_64 gen(88);
    const std::vector<Rational> ps{Rational(1, 4), Rational(1, 3), Rational(1, 2), Rational(2, 3), Rational(3, 4)};
    const std::vector<Rational> as{Rational(1, 5), Rational(1, 3), Rational(1, 2), Rational(2, 3)};
    auto random_law = [&] {
        Rational p = ps[gen() % ps.size()], a = as[gen() % as.size()];
        return WeightLaw::two_point(a, (1 - p * a) / (1 - p), p);
    };
    int mc_fail = 0;
    double worst = 0;
    for (int t = 0; t < 20; ++t) {
        int m = 2 + static_cast<int>(gen() % 2);
        int k = 1 + static_cast<int>(gen() % (m == 2 ? 3 : 2));
        double q = std::vector<double>{2.0, 2.5, 3.0}[gen() % 3];
        WeightModel model = gen() % 2 ? WeightModel::homogeneous(random_law()) : WeightModel::per_depth({random_law(), random_law()});
        BaseMeasure mu = gen() % 2 ? BaseMeasure::uniform(TreeShape(m, k)) : skewed(m, k);
        double exact = exact_moment_discrete(model, mu, q, k).value;
        auto mc = mc_moment(model, mu, q, k, 20000, 1000 + static_cast<std::uint64_t>(t));
        double z = std::abs(mc.estimate - exact) / mc.stderr_;
        worst = std::max(worst, z);
        if (z > 4) ++mc_fail;
    }
    return {exact_fail == 0 && mc_fail == 0, false,
            std::to_string(exact_checks) + " exact integer/discrete equalities (" + std::to_string(exact_fail) + " mismatches), 20 MC instances, worst |z| " +
                fmt(worst)};
}

// --- 9 ----------------------------------------------------------------------

Outcome criterion9() {
    std::vector<WeightLaw> laws{half_three_halves(), WeightLaw::two_point(Rational(1, 2), Rational(17, 5), Rational(24, 29)),
                                WeightLaw::discrete({Rational(1, 5), Rational(1), Rational(13, 5)}, {Rational(1, 2), Rational(1, 4), Rational(1, 4)}),
                                WeightLaw::lognormal(0.4)};
    double worst = 0;
    for (const auto& law : laws)
        for (int m : {2, 3})
            for (double q : {2.0, 2.5, 3.0}) {
                double ewq = 0;
                if (law.finite_support()) {
                    for (const auto& [v, p] : law.support()) ewq += to_double(p) * std::pow(to_double(v), q);
                } else {
                    ewq = std::exp(0.5 * q * (q - 1) * 0.4 * 0.4);
                }
                // m^{-q} Σ_i E(W_i^q) with m identical weights
                double closed = std::pow(m, -q) * m * ewq;
                auto p = criterion_profile(WeightModel::homogeneous(law), BaseMeasure::uniform(TreeShape(m, 10)), q, 10);
                for (double s : p.s) worst = std::max(worst, std::abs(s - closed) / closed);
            }
    return {worst <= 1e-12, false, "max relative deviation " + fmt(worst) + " over 24 profiles x 10 levels"};
}

// --- 10 ---------------------------------------------------------------------

std::pair<int, std::string> run_cli(const std::string& args) {
    std::string cmd = "\"" CASCADE_LAB_CLI_PATH "\" " + args + " 2>/dev/null";
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, out};
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
    int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

Outcome criterion10() {
    const std::vector<std::string> commands{"verify --q 2,2.5", "simulate --trials 2000 --k 8 --seed 7", "simulate --trials 300 --k 5 --format json"};
    bool same = true, clean = true;
    for (const auto& c : commands) {
        auto ref = run_cli(c + " --threads 1");
        clean = clean && ref.first == 0 && !ref.second.empty();
        for (const char* t : {" --threads 1", " --threads 4", " --threads 4"}) {
            auto again = run_cli(c + t);
            same = same && again.first == ref.first && again.second == ref.second;
        }
    }
    return {same && clean, false, std::string("verify and simulate outputs ") + (same ? "byte-identical" : "DIFFER") + " across runs and --threads 1/4"};
}

} // namespace

int main() {
    struct Entry {
        int id;
        std::function<Outcome()> run;
        double limit_s;
    };
    const std::vector<Entry> criteria{{1, criterion1, 10},  {2, criterion2, 0},  {3, criterion3, 60}, {4, criterion4, 0},
                                      {5, criterion5, 0},   {6, criterion6, 120}, {7, criterion7, 0},  {8, criterion8, 0},
                                      {9, criterion9, 0},   {10, criterion10, 0}};
    int passed = 0, known = 0, unexpected = 0;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0 && secs > c.limit_s) {
            o.pass = false;
            o.known_deviation = false;
            o.detail += "; runtime limit " + fmt(c.limit_s) + " s exceeded";
        }
        std::printf("criterion %2d: %s  %s%s [%.1f s]\n", c.id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    !o.pass && o.known_deviation ? " (known deviation)" : "", secs);
        std::fflush(stdout);
        if (o.pass) {
            ++passed;
        } else if (o.known_deviation) {
            ++known;
        } else {
            ++unexpected;
        }
    }
    std::printf("%d/%zu criteria pass, %d known deviation(s), %d unexpected failure(s)\n", passed, criteria.size(), known, unexpected);
    return unexpected == 0 ? 0 : 1;
}
