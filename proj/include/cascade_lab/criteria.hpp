#ifndef CASCADE_LAB_CRITERIA_HPP
#define CASCADE_LAB_CRITERIA_HPP

#include <algorithm>
#include <charconv>
#include <functional>
#include <limits>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cascade_lab/conditional.hpp"
#include "cascade_lab/counting.hpp"
#include "cascade_lab/errors.hpp"
#include "cascade_lab/flat_tree.hpp"
#include "cascade_lab/moments.hpp"
#include "cascade_lab/orbits.hpp"

namespace cascade_lab {

enum class Verdict { satisfied, violated, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::satisfied:
        return "satisfied";
    case Verdict::violated:
        return "violated";
    case Verdict::inconclusive:
        return "inconclusive";
    }
    return "?";
}

/// S_l and s_l = S_l^{1/l} for l = 1..k_max with a three-valued verdict read
/// off the trailing half of the range.
struct CriterionProfile {
    double q = 2;
    int k_max = 1;
    double delta = 0.01;
    std::vector<MomentValue> S;  // S[l-1]
    std::vector<double> log_S;
    std::vector<double> s;
    int trailing_begin = 1;
    double trailing_max = 0;
    double trailing_min = 0;
    Verdict verdict = Verdict::inconclusive;
};

inline double log_of(const MomentValue& v) { return v.is_exact() ? log_rational(*v.exact) : std::log(v.value); }

inline CriterionProfile criterion_profile(const WeightModel& model, const BaseMeasure& mu, double q, int k_max,
                                          double delta = 0.01) {
    if (k_max < 1 || k_max > mu.shape().k) throw ArgumentError("k_max must lie in 1..k");
    if (!(q > 1)) throw ArgumentError("criterion needs q > 1");
    if (!(delta > 0 && delta < 1)) throw ArgumentError("delta must lie in (0,1)");
    CriterionProfile p;
    p.q = q;
    p.k_max = k_max;
    p.delta = delta;
    for (int l = 1; l <= k_max; ++l) {
        p.S.push_back(level_moment_sum(model, mu, q, l));
        p.log_S.push_back(log_of(p.S.back()));
        p.s.push_back(std::exp(p.log_S.back() / l));
    }
    p.trailing_begin = k_max / 2 + 1;
    auto first = p.s.begin() + (p.trailing_begin - 1);
    p.trailing_max = *std::max_element(first, p.s.end());
    p.trailing_min = *std::min_element(first, p.s.end());
    if (p.trailing_max <= 1 - delta) {
        p.verdict = Verdict::satisfied;
    } else if (p.trailing_min >= 1 + delta) {
        p.verdict = Verdict::violated;
    }
    return p;
}

/// S_l <= c λ^{(q-1) l} on every level of the source profile (and l = 0).
struct GeometricBound {
    double c = 1;
    double lambda = 0.5;
    double q = 2;
};

inline GeometricBound fit_geometric_bound(const CriterionProfile& p) {
    if (p.verdict != Verdict::satisfied) throw StateError("geometric bound needs a satisfied criterion profile");
    GeometricBound g;
    g.q = p.q;
    g.lambda = std::pow(p.trailing_max, 1.0 / (p.q - 1)) + 1e-6;
    if (!(g.lambda < 1)) throw StateError("fitted lambda is not below 1");
    double log_c = 0;  // S_0 = 1
    for (int l = 1; l <= p.k_max; ++l)
        log_c = std::max(log_c, p.log_S[static_cast<std::size_t>(l - 1)] - (p.q - 1) * l * std::log(g.lambda));
    g.c = std::exp(log_c) * (1 + 1e-12);
    return g;
}

inline bool geometric_bound_holds(const CriterionProfile& p, const GeometricBound& g) {
    if (!(g.c >= 1)) return false;
    for (int l = 1; l <= p.k_max; ++l)
        if (p.log_S[static_cast<std::size_t>(l - 1)] > std::log(g.c) + (p.q - 1) * l * std::log(g.lambda)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Verification reports

enum class Relation { le, eq };

struct CheckRow {
    std::string instance;
    MomentValue lhs;
    MomentValue rhs;
    Relation relation = Relation::le;
    double margin = 0;  // rhs - lhs
    bool exact = false;
    bool pass = false;
};

struct VerificationReport {
    std::string check;
    std::string description;
    std::vector<CheckRow> rows;
    std::vector<std::string> notes;
    std::string error;
    bool resource_error = false;

    bool pass() const {
        if (!error.empty() || rows.empty()) return false;
        return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
    }
    std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const CheckRow& r) { return !r.pass; }));
    }
    double min_margin() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& r : rows) m = std::min(m, r.margin);
        return m;
    }
};

struct VerifyOptions {
    std::uint64_t cap = kDefaultOutcomeCap;
    double perturb_rhs = 0;  // test hook: rhs is scaled by (1 + perturb_rhs)
};

inline constexpr double kFloatTolerance = 1e-9;

/// Pass rule: exact rows need margin >= 0 (= 0 for equalities); float rows
/// allow 1e-9 relative slack.
inline CheckRow make_row(std::string instance, MomentValue lhs, MomentValue rhs, Relation rel, const VerifyOptions& opt) {
    if (opt.perturb_rhs != 0) {
        if (rhs.is_exact()) {
            rhs = MomentValue::of(*rhs.exact * rational_from_double(1 + opt.perturb_rhs));
        } else {
            rhs = MomentValue::of(rhs.value * (1 + opt.perturb_rhs));
        }
    }
    CheckRow row;
    row.instance = std::move(instance);
    row.relation = rel;
    row.exact = lhs.is_exact() && rhs.is_exact();
    if (row.exact) {
        Rational margin = *rhs.exact - *lhs.exact;
        row.margin = to_double(margin);
        row.pass = rel == Relation::eq ? margin == 0 : margin >= 0;
    } else {
        row.margin = rhs.value - lhs.value;
        double tol = kFloatTolerance * std::max({std::abs(lhs.value), std::abs(rhs.value), 1e-300});
        row.pass = rel == Relation::eq ? std::abs(row.margin) <= tol : row.margin >= -tol;
    }
    row.lhs = std::move(lhs);
    row.rhs = std::move(rhs);
    return row;
}

namespace detail {

inline std::string fmt_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

inline std::string levels_string(const std::vector<int>& levels) {
    if (levels.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < levels.size(); ++i) s += (i ? "-" : "") + std::to_string(levels[i]);
    return s;
}

inline std::string matrix_string(const JoinClass& c) {
    std::string s = "[";
    for (int r = 0; r < c.n; ++r) {
        s += r ? ";" : "";
        for (int t = 0; t < c.n; ++t) s += (t ? " " : "") + std::to_string(c.at(r, t));
    }
    return s + "]";
}

inline std::string support_string(const std::vector<int>& support) {
    std::string s;
    for (std::size_t i = 0; i < support.size(); ++i) s += (i ? "-" : "") + std::to_string(support[i] + 1);
    return s;
}

/// S_0..S_k.
inline std::vector<MomentValue> level_sums(const WeightModel& model, const BaseMeasure& mu, double q, int k) {
    std::vector<MomentValue> S;
    for (int l = 0; l <= k; ++l) S.push_back(level_moment_sum(model, mu, q, l));
    return S;
}

/// Π_{l∈levels} S_l^{1/(q-1)} · S_{l0}^{ε/(q-1)}; exact when every exponent is 1
/// (q = 2, ε = 0) and the sums are exact. An empty product is 1.
inline MomentValue rhs_product(const std::vector<MomentValue>& S, const std::vector<int>& levels, double q,
                               std::optional<int> l0, double eps) {
    if (levels.empty() && !l0) return MomentValue::of(Rational(1));
    bool exact = q == 2 && !l0;
    for (int l : levels) exact = exact && S[static_cast<std::size_t>(l)].is_exact();
    if (exact) {
        Rational p = 1;
        for (int l : levels) p *= *S[static_cast<std::size_t>(l)].exact;
        return MomentValue::of(p);
    }
    double log_p = 0;
    for (int l : levels) log_p += log_of(S[static_cast<std::size_t>(l)]) / (q - 1);
    if (l0) log_p += eps / (q - 1) * log_of(S[static_cast<std::size_t>(*l0)]);
    return MomentValue::of(std::exp(log_p));
}

/// Every joint outcome of T_k with its leaf values Y_i (lexicographic).
struct LeafOutcomes {
    std::vector<Rational> prob;
    std::vector<std::vector<Rational>> y;
};

inline LeafOutcomes leaf_outcomes(const WeightModel& model, const BaseMeasure& mu, int k, std::uint64_t cap) {
    model.validate(mu.shape());
    FlatTree tree(model, mu, k);
    OutcomeEnumerator all(tree, 1, tree.size(), cap);
    LeafOutcomes out;
    std::vector<Rational> weights(tree.size(), Rational(1)), y;
    all.run(weights, [&](const std::vector<Rational>& w, const Rational& prob) {
        tree.y_values(w, y);
        out.prob.push_back(prob);
        out.y.emplace_back(y.begin() + static_cast<std::ptrdiff_t>(tree.begin_of(k)), y.begin() + static_cast<std::ptrdiff_t>(tree.end_of(k)));
    });
    return out;
}

/// All tuples (as leaf indices) whose meet matrix equals the class matrix.
inline std::vector<std::vector<std::size_t>> orbit_tuples(const TreeShape& shape, const JoinClass& c, std::uint64_t cap) {
    if (c.k != shape.k) throw ArgumentError("class depth differs from the tree depth");
    auto leaves = level_vertices(shape, shape.k);
    const std::size_t L = leaves.size();
    long double raw = std::pow(static_cast<long double>(L), c.n);
    if (raw > static_cast<long double>(cap)) throw ResourceError("orbit enumeration exceeds the cap");
    std::vector<int> meet_table(L * L);
    for (std::size_t a = 0; a < L; ++a)
        for (std::size_t b = 0; b < L; ++b) meet_table[a * L + b] = static_cast<int>(meet_length(leaves[a], leaves[b]));
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> t(static_cast<std::size_t>(c.n), 0);
    std::function<void(int)> rec = [&](int r) {
        if (r == c.n) {
            out.push_back(t);
            return;
        }
        for (std::size_t a = 0; a < L; ++a) {
            bool ok = true;
            for (int s = 0; s < r && ok; ++s) ok = meet_table[a * L + t[static_cast<std::size_t>(s)]] == c.at(r, s);
            if (!ok) continue;
            t[static_cast<std::size_t>(r)] = a;
            rec(r + 1);
        }
    };
    rec(0);
    return out;
}

struct MarkedTuple {
    std::vector<std::size_t> leaves;
    std::vector<std::size_t> attached;  // leaves j with j ∧ T(J) = p
};

inline std::vector<MarkedTuple> marked_orbit_tuples(const TreeShape& shape, const MarkedJoinClass& c, std::uint64_t cap) {
    if (c.mark_support.empty()) throw ArgumentError("mark support must be nonempty");
    auto leaves = level_vertices(shape, shape.k);
    std::vector<MarkedTuple> out;
    for (auto& t : orbit_tuples(shape, c.base, cap)) {
        std::vector<Word> entries;
        for (auto a : t) entries.push_back(leaves[a]);
        Word p = curtail(entries[static_cast<std::size_t>(c.mark_support.front())], c.mark_level);
        std::vector<int> support;
        for (std::size_t r = 0; r < entries.size(); ++r)
            if (p.is_prefix_of(entries[r])) support.push_back(static_cast<int>(r));
        if (support != c.mark_support) continue;
        LeafTuple J(shape, entries);
        MarkedTuple mt{t, {}};
        for (std::size_t j = 0; j < leaves.size(); ++j)
            if (meet_with_spanned_tree(leaves[j], J) == p) mt.attached.push_back(j);
        out.push_back(std::move(mt));
    }
    return out;
}

inline MomentValue plain_lhs(const LeafOutcomes& o, const std::vector<std::vector<std::size_t>>& tuples) {
    Rational sum = 0;
    for (std::size_t w = 0; w < o.prob.size(); ++w) {
        Rational inner = 0;
        for (const auto& t : tuples) {
            Rational p = 1;
            for (auto a : t) p *= o.y[w][a];
            inner += p;
        }
        sum += o.prob[w] * inner;
    }
    return MomentValue::of(sum);
}

inline MomentValue marked_lhs(const LeafOutcomes& o, const std::vector<MarkedTuple>& tuples, double eps) {
    CompensatedSum sum;
    for (std::size_t w = 0; w < o.prob.size(); ++w) {
        double inner = 0;
        for (const auto& t : tuples) {
            Rational p = 1, window = 0;
            for (auto a : t.leaves) p *= o.y[w][a];
            for (auto j : t.attached) window += o.y[w][j];
            inner += to_double(p) * real_pow(window, eps);
        }
        sum.add(to_double(o.prob[w]) * inner);
    }
    return MomentValue::of(sum.value());
}

inline MomentValue total_power_lhs(const LeafOutcomes& o, const std::vector<std::vector<std::size_t>>& tuples, double eps) {
    CompensatedSum sum;
    for (std::size_t w = 0; w < o.prob.size(); ++w) {
        Rational z = 0;
        for (const auto& y : o.y[w]) z += y;
        double zeps = real_pow(z, eps), inner = 0;
        for (const auto& t : tuples) {
            Rational p = 1;
            for (auto a : t) p *= o.y[w][a];
            inner += to_double(p);
        }
        sum.add(to_double(o.prob[w]) * inner * zeps);
    }
    return MomentValue::of(sum.value());
}

inline void check_plain_order(double q, int n) {
    if (n == 1 ? !(q >= 1) : !(q >= n && q > 1)) throw ArgumentError("need q >= n (and q > 1 unless n = 1)");
}

} // namespace detail

inline std::string describe_law(const WeightLaw& law) { return law.describe(); }

inline std::string describe_instance(const WeightModel& model, const BaseMeasure& mu) {
    std::string s = "m=" + std::to_string(mu.shape().m) + " k=" + std::to_string(mu.shape().k) + " model=";
    switch (model.assignment()) {
    case WeightModel::Assignment::homogeneous:
        s += "homogeneous";
        break;
    case WeightModel::Assignment::per_depth:
        s += "per_depth";
        break;
    case WeightModel::Assignment::per_vertex:
        s += "per_vertex";
        break;
    }
    s += "[";
    for (std::size_t i = 0; i < model.laws().size(); ++i) s += (i ? ";" : "") + model.laws()[i].describe();
    s += "] measure=";
    switch (mu.kind()) {
    case BaseMeasure::Kind::uniform:
        s += "uniform";
        break;
    case BaseMeasure::Kind::per_depth:
        s += "per_depth";
        break;
    case BaseMeasure::Kind::per_vertex:
        s += "per_vertex";
        break;
    }
    return s;
}

/// Σ_{|v|=l, v⪰w} E(Y_v | F_{|w|}) = Y_w on every atom, for |w| < k.
/// Depth-k vertices are omitted: there l = |w| and both sides are Y_w.
inline VerificationReport verify_identity_33(const WeightModel& model, const BaseMeasure& mu, int k,
                                             const VerifyOptions& opt = {}) {
    if (k < 1 || k > mu.shape().k) throw ArgumentError("k must lie in 1..shape.k");
    VerificationReport rep;
    rep.check = "identity_33";
    rep.description = describe_instance(model, mu);
    for (int d = 0; d < k; ++d) {
        std::size_t atom_index = 0;
        for_each_prefix_atom(model, mu, d, opt.cap, [&](const PrefixOutcome& atom) {
            for (const auto& w : level_vertices(mu.shape(), d)) {
                Rational yw = d == 0 ? Rational(1) : y_on_atom(mu, atom, w);
                for (int l = d; l <= k; ++l) {
                    Rational lhs = 0;
                    if (l == 0) {
                        lhs = 1;
                    } else {
                        for (const auto& v : level_vertices(mu.shape(), l))
                            if (w.is_prefix_of(v)) lhs += *conditional_expectation_discrete(model, mu, CondExpr::y(v), atom, opt.cap).exact;
                    }
                    rep.rows.push_back(make_row("w=" + (w.empty() ? std::string("root") : w.to_string()) + " l=" + std::to_string(l) +
                                                    " atom=" + std::to_string(atom_index),
                                                MomentValue::of(lhs), MomentValue::of(yw), Relation::eq, opt));
                }
            }
            ++atom_index;
        });
    }
    return rep;
}

/// E((Σ_{|v|=l, v⪰w} Y_v)^ε | F_{|w|}) <= Y_w^ε on every atom, for |w| < k.
inline VerificationReport verify_epsilon_35(const WeightModel& model, const BaseMeasure& mu, int k, double eps,
                                            const VerifyOptions& opt = {}) {
    if (!(eps >= 0 && eps <= 1)) throw ArgumentError("epsilon must lie in [0,1]");
    if (k < 1 || k > mu.shape().k) throw ArgumentError("k must lie in 1..shape.k");
    VerificationReport rep;
    rep.check = "epsilon_35";
    rep.description = describe_instance(model, mu) + " epsilon=" + detail::fmt_double(eps);
    const Relation rel = (eps == 0 || eps == 1) ? Relation::eq : Relation::le;
    for (int d = 0; d < k; ++d) {
        std::size_t atom_index = 0;
        for_each_prefix_atom(model, mu, d, opt.cap, [&](const PrefixOutcome& atom) {
            for (const auto& w : level_vertices(mu.shape(), d)) {
                Rational yw = d == 0 ? Rational(1) : y_on_atom(mu, atom, w);
                for (int l = std::max(d, 1); l <= k; ++l) {
                    auto lhs = conditional_expectation_discrete(model, mu, CondExpr::window(w, l, eps), atom, opt.cap);
                    auto rhs = detail::power_value(yw, eps);
                    rep.rows.push_back(make_row("w=" + (w.empty() ? std::string("root") : w.to_string()) + " l=" + std::to_string(l) +
                                                    " atom=" + std::to_string(atom_index),
                                                std::move(lhs), std::move(rhs), rel, opt));
                }
            }
            ++atom_index;
        });
    }
    return rep;
}

namespace detail {

inline CheckRow prop31_plain_row(const LeafOutcomes& o, const std::vector<MomentValue>& S, const TreeShape& shape,
                                 double q, const JoinClass& c, const VerifyOptions& opt) {
    check_plain_order(q, c.n);
    auto tuples = orbit_tuples(shape, c, opt.cap);
    auto levels = c.levels();
    MomentValue rhs = levels.empty() ? MomentValue::of(Rational(1)) : rhs_product(S, levels, q, std::nullopt, 0);
    return make_row("n=" + std::to_string(c.n) + " levels=" + levels_string(levels) + " D=" + matrix_string(c),
                    plain_lhs(o, tuples), std::move(rhs), Relation::le, opt);
}

inline CheckRow prop31_marked_row(const LeafOutcomes& o, const std::vector<MomentValue>& S, const TreeShape& shape,
                                  double q, const MarkedJoinClass& c, const VerifyOptions& opt) {
    const double eps = q - c.base.n;
    if (!(eps > 0 && eps < 1)) throw ArgumentError("marked classes need q = n + epsilon with 0 < epsilon < 1");
    auto tuples = marked_orbit_tuples(shape, c, opt.cap);
    auto rhs = rhs_product(S, c.base.levels(), q, c.mark_level, eps);
    return make_row("n=" + std::to_string(c.base.n) + " levels=" + levels_string(c.base.levels()) + " D=" + matrix_string(c.base) +
                        " mark_level=" + std::to_string(c.mark_level) + " support=" + support_string(c.mark_support),
                    marked_lhs(o, tuples, eps), std::move(rhs), Relation::le, opt);
}

/// Marked classes of a representative: one per vertex of its spanned tree.
inline std::vector<MarkedJoinClass> marked_classes_of(const LeafTuple& rep) {
    std::vector<MarkedJoinClass> out;
    for (const auto& p : spanned_vertices(rep)) out.push_back(canonical_marked_class(MarkedLeafTuple(rep, p)));
    return out;
}

} // namespace detail

inline VerificationReport verify_prop31(const WeightModel& model, const BaseMeasure& mu, double q, int k, const JoinClass& c,
                                        const VerifyOptions& opt = {}) {
    VerificationReport rep;
    rep.check = "prop31";
    rep.description = describe_instance(model, mu) + " q=" + detail::fmt_double(q);
    auto o = detail::leaf_outcomes(model, mu, k, opt.cap);
    auto S = detail::level_sums(model, mu, std::max(q, 1.0 + 1e-12), k);
    rep.rows.push_back(detail::prop31_plain_row(o, S, TreeShape(mu.shape().m, k), q, c, opt));
    return rep;
}

inline VerificationReport verify_prop31(const WeightModel& model, const BaseMeasure& mu, double q, int k,
                                        const MarkedJoinClass& c, const VerifyOptions& opt = {}) {
    VerificationReport rep;
    rep.check = "prop31";
    rep.description = describe_instance(model, mu) + " q=" + detail::fmt_double(q);
    auto o = detail::leaf_outcomes(model, mu, k, opt.cap);
    auto S = detail::level_sums(model, mu, q, k);
    rep.rows.push_back(detail::prop31_marked_row(o, S, TreeShape(mu.shape().m, k), q, c, opt));
    return rep;
}

/// Every plain class with n = floor(q) (root-level inequality, valid for
/// q >= n) and, for fractional q, every marked class.
inline VerificationReport verify_prop31_all(const WeightModel& model, const BaseMeasure& mu, double q, int k,
                                            const VerifyOptions& opt = {}) {
    auto order = MomentOrder::from(q);
    TreeShape shape(mu.shape().m, k);
    VerificationReport rep;
    rep.check = "prop31";
    rep.description = describe_instance(model, mu) + " q=" + detail::fmt_double(q) + " k=" + std::to_string(k);
    auto o = detail::leaf_outcomes(model, mu, k, opt.cap);
    auto S = detail::level_sums(model, mu, q, k);
    auto classes = enumerate_classes(shape, order.n);
    for (const auto& c : classes) rep.rows.push_back(detail::prop31_plain_row(o, S, shape, q, c.cls, opt));
    if (!order.integral()) {
        std::vector<MarkedJoinClass> marked;
        for (const auto& c : classes)
            for (auto& mc : detail::marked_classes_of(c.representative)) marked.push_back(std::move(mc));
        std::sort(marked.begin(), marked.end());
        for (const auto& mc : marked) rep.rows.push_back(detail::prop31_marked_row(o, S, shape, q, mc, opt));
    }
    return rep;
}

namespace detail {

inline CheckRow cor34_row(const LeafOutcomes& o, const std::vector<MomentValue>& S, const TreeShape& shape, double q,
                          const ClassEntry& c, const VerifyOptions& opt) {
    const int n = c.cls.n;
    const double eps = q - n;
    if (!(eps >= 0 && eps < 1)) throw ArgumentError("Cor 3.4 needs q = n + epsilon with 0 <= epsilon < 1");
    if (eps == 0) {
        if (n == 1 && q == 1) {
            auto tuples = orbit_tuples(shape, c.cls, opt.cap);
            return make_row("n=1 levels=none", plain_lhs(o, tuples), MomentValue::of(Rational(1)), Relation::le, opt);
        }
        return prop31_plain_row(o, S, shape, q, c.cls, opt);
    }
    auto tuples = orbit_tuples(shape, c.cls, opt.cap);
    auto levels = c.cls.levels();
    std::vector<MomentValue> terms;
    bool exact = true;
    for (const auto& p : spanned_vertices(c.representative)) {
        terms.push_back(rhs_product(S, levels, q, static_cast<int>(p.size()), eps));
        exact = exact && terms.back().is_exact();
    }
    CompensatedSum rhs;
    for (const auto& t : terms) rhs.add(t.value);
    return make_row("n=" + std::to_string(n) + " levels=" + levels_string(levels) + " D=" + matrix_string(c.cls),
                    total_power_lhs(o, tuples, eps), MomentValue::of(rhs.value()), Relation::le, opt);
}

} // namespace detail

inline VerificationReport verify_cor34(const WeightModel& model, const BaseMeasure& mu, double q, int k, const JoinClass& c,
                                       const VerifyOptions& opt = {}) {
    TreeShape shape(mu.shape().m, k);
    VerificationReport rep;
    rep.check = "cor34";
    rep.description = describe_instance(model, mu) + " q=" + detail::fmt_double(q);
    auto o = detail::leaf_outcomes(model, mu, k, opt.cap);
    auto S = detail::level_sums(model, mu, std::max(q, 1.0 + 1e-12), k);
    for (const auto& e : enumerate_classes(shape, c.n))
        if (e.cls == c) rep.rows.push_back(detail::cor34_row(o, S, shape, q, e, opt));
    if (rep.rows.empty()) throw ArgumentError("class is not realized on this tree");
    return rep;
}

inline VerificationReport verify_cor34_all(const WeightModel& model, const BaseMeasure& mu, double q, int k,
                                           const VerifyOptions& opt = {}) {
    auto order = MomentOrder::from(q);
    TreeShape shape(mu.shape().m, k);
    VerificationReport rep;
    rep.check = "cor34";
    rep.description = describe_instance(model, mu) + " q=" + detail::fmt_double(q) + " k=" + std::to_string(k);
    auto o = detail::leaf_outcomes(model, mu, k, opt.cap);
    auto S = detail::level_sums(model, mu, q, k);
    for (const auto& e : enumerate_classes(shape, order.n)) rep.rows.push_back(detail::cor34_row(o, S, shape, q, e, opt));
    return rep;
}

/// Weighted class counts: Σ N λ^{Σl} <= M and Σ N⁺ λ^{Σl+εl} <= M⁺ on the census of T_k.
inline VerificationReport verify_lemma41(const TreeShape& shape, const std::vector<int>& ns, const std::vector<double>& lambdas,
                                         const std::vector<double>& epsilons, const VerifyOptions& opt = {}) {
    VerificationReport rep;
    rep.check = "lemma41";
    rep.description = "m=" + std::to_string(shape.m) + " k=" + std::to_string(shape.k);
    for (int n : ns) {
        auto census = class_census(shape, n);
        for (double lam : lambdas) {
            std::string base = "n=" + std::to_string(n) + " lambda=" + detail::fmt_double(lam);
            rep.rows.push_back(make_row(base, MomentValue::of(lemma41_sum(census, lam)), MomentValue::of(bound_M(lam, n)),
                                        Relation::le, opt));
            for (double eps : epsilons)
                rep.rows.push_back(make_row(base + " epsilon=" + detail::fmt_double(eps),
                                            MomentValue::of(lemma41_sum_plus(census, lam, eps)),
                                            MomentValue::of(bound_M_plus(lam, eps, n)), Relation::le, opt));
        }
    }
    return rep;
}

/// Largest class counts against the factorial bounds (n-1)! and n!.
inline VerificationReport verify_count_bounds(const TreeShape& shape, const std::vector<int>& ns, const VerifyOptions& opt = {}) {
    VerificationReport rep;
    rep.check = "count_bounds";
    rep.description = "m=" + std::to_string(shape.m) + " k=" + std::to_string(shape.k);
    for (int n : ns) {
        auto census = class_census(shape, n);
        auto [maxN, maxNp] = census_maxima(census);
        rep.rows.push_back(make_row("n=" + std::to_string(n) + " max N vs (n-1)!", MomentValue::of(Rational(maxN)),
                                    MomentValue::of(Rational(static_cast<long>(factorial(n - 1)))), Relation::le, opt));
        rep.rows.push_back(make_row("n=" + std::to_string(n) + " max N_plus vs n!", MomentValue::of(Rational(maxNp)),
                                    MomentValue::of(Rational(static_cast<long>(factorial(n)))), Relation::le, opt));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Moment bound chain

struct BoundOptions {
    std::size_t trials = 100000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::uint64_t cap = kDefaultOutcomeCap;
    double delta = 0.01;
    double perturb_rhs = 0;
};

struct BoundReport {
    double q = 2;
    int k = 1;
    CriterionProfile profile;
    GeometricBound bound;
    std::string count_source;  // "census" or "factorial_bounds"
    double B = 0;                // c^{n-1+ε} Σ N(⁺) λ^{...}
    double B_single_constant = 0;  // same sum with the constant c
    double cap = 0;              // c^{n-1+ε} M or c^{n-1+ε} M⁺
    MomentValue measured;
    double measured_stderr = 0;
    std::string engine;
    VerificationReport report;
};

inline BoundReport moment_bound_report(const WeightModel& model, const BaseMeasure& mu, double q, int k, const BoundOptions& o = {}) {
    auto order = MomentOrder::from(q);
    BoundReport r;
    r.q = q;
    r.k = k;
    r.profile = criterion_profile(model, mu, q, k, o.delta);
    r.bound = fit_geometric_bound(r.profile);
    const double lam = r.bound.lambda, eps = order.epsilon;
    const int n = order.n;
    TreeShape shape(mu.shape().m, k);

    double sum = 0;
    try {
        auto census = class_census(shape, n);
        sum = order.integral() ? lemma41_sum(census, lam) : lemma41_sum_plus(census, lam, eps);
        r.count_source = "census";
    } catch (const ResourceError&) {
        // N <= ((n-1)!)^2 and N⁺ <= n ((n-1)!)^2 hold for ordered tuples.
        double f = factorial(n - 1) * factorial(n - 1);
        double series = n == 1 ? 1.0 : detail::partition_series_bound(lam, n - 1);
        if (order.integral()) {
            sum = f * series;
        } else {
            double marks = 0;
            for (int l = 0; l <= k; ++l) marks += std::pow(lam, eps * l);
            sum = n * f * series * marks;
        }
        r.count_source = "factorial_bounds";
    }
    const double c_pow = std::pow(r.bound.c, n - 1 + eps);
    r.B = c_pow * sum;
    r.B_single_constant = r.bound.c * sum;
    r.cap = c_pow * (order.integral() ? bound_M(lam, n) : bound_M_plus(lam, eps, n));

    VerifyOptions vopt{o.cap, o.perturb_rhs};
    if (order.integral()) {
        if (model.all_finite_support()) {
            r.measured = MomentValue::of(exact_moment_integer<Rational>(model, mu, n, k));
        } else {
            r.measured = MomentValue::of(exact_moment_integer<double>(model, mu, n, k));
        }
        r.engine = "exact_integer";
    } else {
        try {
            r.measured = exact_moment_discrete(model, mu, q, k, o.cap);
            r.engine = "exact_discrete";
        } catch (const ResourceError&) {
            auto mc = mc_moment(model, mu, q, k, o.trials, o.seed, o.threads);
            r.measured = MomentValue::of(mc.estimate - 4 * mc.stderr_);
            r.measured_stderr = mc.stderr_;
            r.engine = "mc";
        } catch (const UnsupportedLawError&) {
            auto mc = mc_moment(model, mu, q, k, o.trials, o.seed, o.threads);
            r.measured = MomentValue::of(mc.estimate - 4 * mc.stderr_);
            r.measured_stderr = mc.stderr_;
            r.engine = "mc";
        }
    }
    r.report.check = "bound_chain";
    r.report.description = describe_instance(model, mu) + " q=" + detail::fmt_double(q) + " k=" + std::to_string(k) +
                           " counts=" + r.count_source + " engine=" + r.engine;
    r.report.rows.push_back(make_row("q=" + detail::fmt_double(q) + " k=" + std::to_string(k) + " moment<=B", r.measured,
                                     MomentValue::of(r.B), Relation::le, vopt));
    r.report.rows.push_back(make_row("q=" + detail::fmt_double(q) + " k=" + std::to_string(k) + " B<=cap", MomentValue::of(r.B),
                                     MomentValue::of(r.cap), Relation::le, vopt));
    r.report.notes.push_back("c=" + detail::fmt_double(r.bound.c) + " lambda=" + detail::fmt_double(lam) +
                             " B_with_constant_c=" + detail::fmt_double(r.B_single_constant));
    if (r.engine == "mc") r.report.notes.push_back("mc lhs is estimate - 4 stderr; stderr=" + detail::fmt_double(r.measured_stderr));
    return r;
}

// ---------------------------------------------------------------------------
// Necessity

struct NecessityOptions {
    double delta = 0.01;
    int window_begin = 0;  // 0: start of the trailing half
    int window_end = 0;    // 0: k_max
};

struct NecessityReport {
    double q = 2;
    int k_max = 1;
    std::string engine;
    // E(Z_k^q) is bracketed by lower[k-1] <= E(Z_k^q) <= upper[k-1]; the two
    // coincide for integer q.
    std::vector<double> lower;
    std::vector<double> upper;
    CriterionProfile profile;
    bool plateau = false;
    double relative_increase = 0;
    double growth_ratio = 0;
    double required_ratio = 0;
    int window_begin = 1;
    int window_end = 1;
    bool pass = false;
    std::string conclusion;
};

/// Brackets for E(Z_k^q), k = 1..k_max, from the exact integer recursion.
/// With n = floor(q), ε = q - n:
///   (E Z^n)^{q/n} <= E Z^q <= (E Z^n)^{1-ε} (E Z^{n+1})^ε
/// by Lyapunov's inequality and log-convexity of p -> E Z^p.
inline void moment_brackets(const WeightModel& model, const BaseMeasure& mu, double q, int k_max, NecessityReport& r) {
    const int n = static_cast<int>(std::floor(q));
    const double eps = q - n;
    const bool integral = eps == 0;
    const int top = integral ? n : n + 1;
    r.engine = integral ? "exact_integer" : "exact_integer_bracket";
    for (int k = 1; k <= k_max; ++k) {
        std::vector<double> mom;
        if (model.all_finite_support()) {
            for (const auto& x : integer_moments<Rational>(model, mu, top, k)) mom.push_back(to_double(x));
        } else {
            mom = integer_moments<double>(model, mu, top, k);
        }
        const double a = mom[static_cast<std::size_t>(n)];
        if (integral) {
            r.lower.push_back(a);
            r.upper.push_back(a);
        } else {
            r.lower.push_back(std::pow(a, q / n));
            r.upper.push_back(std::pow(a, 1 - eps) * std::pow(mom[static_cast<std::size_t>(n + 1)], eps));
        }
    }
}

/// Bounded moments must come with limsup s_l <= 1 + δ; a violated profile
/// must come with geometric growth. Plateau is read off the upper bracket,
/// growth off the lower one, so both conclusions are rigorous.
inline NecessityReport necessity_check(const WeightModel& model, const BaseMeasure& mu, double q, int k_max,
                                       const NecessityOptions& o = {}) {
    if (k_max < 2) throw ArgumentError("necessity check needs k_max >= 2");
    NecessityReport r;
    r.q = q;
    r.k_max = k_max;
    r.profile = criterion_profile(model, mu, q, k_max, o.delta);
    if (!(q >= 1)) throw ArgumentError("necessity check needs q >= 1");
    moment_brackets(model, mu, q, k_max, r);

    std::vector<double> running(r.upper.size());
    std::partial_sum(r.upper.begin(), r.upper.end(), running.begin(), [](double a, double b) { return std::max(a, b); });
    const int half_start = k_max - k_max / 2;  // value at the start of the last half
    double base = running[static_cast<std::size_t>(half_start - 1)];
    r.relative_increase = (running.back() - base) / base;
    r.plateau = r.relative_increase < 0.01;

    r.window_begin = o.window_begin > 0 ? o.window_begin : std::max(1, k_max / 2);
    r.window_end = o.window_end > 0 ? o.window_end : k_max;
    if (r.window_begin >= r.window_end || r.window_end > k_max) throw ArgumentError("invalid growth window");
    r.growth_ratio = std::pow(r.lower[static_cast<std::size_t>(r.window_end - 1)] / r.lower[static_cast<std::size_t>(r.window_begin - 1)],
                              1.0 / (r.window_end - r.window_begin));
    r.required_ratio = std::pow(1 + o.delta / 2, q - 1);

    if (r.plateau) {
        r.pass = r.profile.trailing_max <= 1 + o.delta;
        r.conclusion = r.pass ? "bounded moments with limsup s_l <= 1+delta: consistent"
                              : "bounded moments but s_l >= 1+delta: contradicts necessity";
    } else if (r.profile.verdict == Verdict::violated) {
        r.pass = r.growth_ratio >= r.required_ratio;
        r.conclusion = r.pass ? "criterion violated and moments grow geometrically: consistent"
                              : "criterion violated but growth below the required ratio";
    } else {
        throw InconclusiveError("moments neither plateau nor belong to a violated profile (relative increase " +
                                detail::fmt_double(r.relative_increase) + ")");
    }
    return r;
}

inline VerificationReport necessity_report(const NecessityReport& n, const std::string& description) {
    VerificationReport rep;
    rep.check = "necessity";
    rep.description = description + " q=" + detail::fmt_double(n.q) + " k_max=" + std::to_string(n.k_max) + " engine=" + n.engine;
    CheckRow row;
    row.instance = n.conclusion;
    row.relation = Relation::le;
    if (n.plateau) {
        row.lhs = MomentValue::of(n.profile.trailing_max);
        row.rhs = MomentValue::of(1 + n.profile.delta);
    } else {
        row.lhs = MomentValue::of(n.required_ratio);
        row.rhs = MomentValue::of(n.growth_ratio);
    }
    row.margin = row.rhs.value - row.lhs.value;
    row.pass = n.pass;
    rep.rows.push_back(row);
    rep.notes.push_back("plateau=" + std::string(n.plateau ? "true" : "false") + " relative_increase=" +
                        detail::fmt_double(n.relative_increase) + " growth_ratio=" + detail::fmt_double(n.growth_ratio));
    return rep;
}

} // namespace cascade_lab

#endif // CASCADE_LAB_CRITERIA_HPP
