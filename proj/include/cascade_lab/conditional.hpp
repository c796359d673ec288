#ifndef CASCADE_LAB_CONDITIONAL_HPP
#define CASCADE_LAB_CONDITIONAL_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "cascade_lab/errors.hpp"
#include "cascade_lab/flat_tree.hpp"
#include "cascade_lab/moments.hpp"
#include "cascade_lab/rational.hpp"
#include "cascade_lab/tree_words.hpp"
#include "cascade_lab/weights.hpp"

namespace cascade_lab {

/// One atom of F_depth: fixed weights for every vertex with |i| <= depth,
/// in breadth-first order (slot 0 is the root and holds 1).
struct PrefixOutcome {
    int depth = 0;
    std::vector<Rational> weights{Rational(1)};
    Rational probability = 1;
};

/// Calls f(atom) for every atom of F_depth with positive probability.
template <class F>
void for_each_prefix_atom(const WeightModel& model, const BaseMeasure& mu, int depth, std::uint64_t cap, F&& f) {
    if (depth < 0 || depth > mu.shape().k) throw ArgumentError("prefix depth outside 0..k");
    model.validate(mu.shape());
    FlatTree tree(model, mu, depth);
    OutcomeEnumerator outcomes(tree, 1, tree.size(), cap);
    std::vector<Rational> weights(tree.size(), Rational(1));
    PrefixOutcome atom;
    atom.depth = depth;
    outcomes.run(weights, [&](const std::vector<Rational>& w, const Rational& prob) {
        atom.weights = w;
        atom.probability = prob;
        f(static_cast<const PrefixOutcome&>(atom));
    });
}

/// Y_v, Y_v^power, or (Σ_{|u|=level, u⪰v} Y_u)^power.
struct CondExpr {
    enum class Kind { y, y_power, window };
    Kind kind = Kind::y;
    Word vertex;
    int level = 0;
    double power = 1.0;

    static CondExpr y(Word v) { return {Kind::y, std::move(v), 0, 1.0}; }
    static CondExpr y_power(Word v, double q) { return {Kind::y_power, std::move(v), 0, q}; }
    static CondExpr window(Word w, int l, double power = 1.0) { return {Kind::window, std::move(w), l, power}; }

    int target_level() const { return kind == Kind::window ? level : static_cast<int>(vertex.size()); }
};

namespace detail {

/// Breadth-first index range of the descendants of w at depth d >= |w|.
inline std::pair<std::size_t, std::size_t> descendant_range(const Word& w, int d, int m) {
    Word first = w;
    while (static_cast<int>(first.size()) < d) first.push_back(1);
    auto begin = static_cast<std::size_t>(canonical_index(first, m));
    std::size_t count = 1;
    for (int t = static_cast<int>(w.size()); t < d; ++t) count *= static_cast<std::size_t>(m);
    return {begin, begin + count};
}

inline MomentValue power_value(const Rational& base, double power) {
    if (power == 0.0) return MomentValue::of(Rational(1));
    if (is_integer_exponent(power) && power > 0) return MomentValue::of(ipow(base, static_cast<unsigned>(power)));
    return MomentValue::of(real_pow(base, power));
}

} // namespace detail

/// E(expr | atom): enumerates the weights deeper than the atom that expr
/// depends on (the path to the anchor and the anchor's subtree down to the
/// target level); independent weights elsewhere integrate out to nothing.
inline MomentValue conditional_expectation_discrete(const WeightModel& model, const BaseMeasure& mu, const CondExpr& expr,
                                                    const PrefixOutcome& given, std::uint64_t cap = kDefaultOutcomeCap) {
    const int m = mu.shape().m;
    const int L = expr.target_level();
    const int anchor_depth = static_cast<int>(expr.vertex.size());
    if (!expr.vertex.valid_for(m) || anchor_depth > mu.shape().k) throw ArgumentError("expression vertex is not in T_k");
    if (expr.kind == CondExpr::Kind::window && (L < anchor_depth || L > mu.shape().k))
        throw ArgumentError("window level must lie between |w| and k");
    if (expr.kind != CondExpr::Kind::window && anchor_depth == 0) throw ArgumentError("Y_v needs a nonroot vertex");
    if (!(expr.power >= 0)) throw ArgumentError("power must be >= 0");
    model.validate(mu.shape());

    const int depth = std::max(L, given.depth);
    FlatTree tree(model, mu, depth);
    if (given.weights.size() != static_cast<std::size_t>(vertex_count(m, given.depth)))
        throw ArgumentError("prefix outcome does not match its depth");

    std::vector<std::size_t> free;
    for (int d = given.depth + 1; d <= L; ++d) {
        if (d <= anchor_depth) {
            free.push_back(static_cast<std::size_t>(canonical_index(curtail(expr.vertex, d), m)));
        } else {
            auto [b, e] = detail::descendant_range(expr.vertex, d, m);
            for (std::size_t a = b; a < e; ++a) free.push_back(a);
        }
    }
    OutcomeEnumerator outcomes(tree, std::move(free), cap);

    auto [wb, we] = expr.kind == CondExpr::Kind::window
                        ? detail::descendant_range(expr.vertex, L, m)
                        : std::pair<std::size_t, std::size_t>{static_cast<std::size_t>(canonical_index(expr.vertex, m)),
                                                              static_cast<std::size_t>(canonical_index(expr.vertex, m)) + 1};
    const double power = expr.kind == CondExpr::Kind::y ? 1.0 : expr.power;
    const bool exact = power == 0.0 || (is_integer_exponent(power) && power > 0);

    std::vector<Rational> weights(tree.size(), Rational(1));
    std::copy(given.weights.begin(), given.weights.end(), weights.begin());
    std::vector<Rational> y;
    Rational exact_sum = 0;
    CompensatedSum float_sum;
    outcomes.run(weights, [&](const std::vector<Rational>& w, const Rational& prob) {
        tree.y_values(w, y);
        Rational s = FlatTree::level_sum(y, wb, we);
        MomentValue v = detail::power_value(s, power);
        if (exact) {
            exact_sum += prob * *v.exact;
        } else {
            float_sum.add(to_double(prob) * v.value);
        }
    });
    return exact ? MomentValue::of(exact_sum) : MomentValue::of(float_sum.value());
}

/// Y_v evaluated on an atom deep enough to determine it.
inline Rational y_on_atom(const BaseMeasure& mu, const PrefixOutcome& atom, const Word& v) {
    if (static_cast<int>(v.size()) > atom.depth) throw ArgumentError("Y_v is not determined by this atom");
    const int m = mu.shape().m;
    Rational y = cylinder_mass(mu, v);
    for (int d = 1; d <= static_cast<int>(v.size()); ++d)
        y *= atom.weights[static_cast<std::size_t>(canonical_index(curtail(v, d), m))];
    return y;
}

} // namespace cascade_lab

#endif // CASCADE_LAB_CONDITIONAL_HPP
