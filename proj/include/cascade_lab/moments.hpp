#ifndef CASCADE_LAB_MOMENTS_HPP
#define CASCADE_LAB_MOMENTS_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "cascade_lab/errors.hpp"
#include "cascade_lab/flat_tree.hpp"
#include "cascade_lab/parallel.hpp"
#include "cascade_lab/rational.hpp"
#include "cascade_lab/rng.hpp"
#include "cascade_lab/tree_words.hpp"
#include "cascade_lab/weights.hpp"

namespace cascade_lab {

/// Default cap on enumerated outcome spaces.
inline constexpr std::uint64_t kDefaultOutcomeCap = std::uint64_t{1} << 20;

/// q = n + ε with integer n >= 1 and 0 <= ε < 1.
struct MomentOrder {
    double q = 2.0;
    int n = 2;
    double epsilon = 0.0;

    static MomentOrder from(double q) {
        if (!(q > 1.0) || !std::isfinite(q)) throw ArgumentError("moment order q must be a finite real > 1");
        MomentOrder o;
        o.q = q;
        o.n = static_cast<int>(std::floor(q));
        o.epsilon = q - o.n;
        return o;
    }

    bool integral() const noexcept { return epsilon == 0.0; }
};

/// A value that is exact whenever the inputs allow it; `value` always holds
/// the double rendering.
struct MomentValue {
    std::optional<Rational> exact;
    double value = 0.0;

    static MomentValue of(Rational r) {
        double d = to_double(r);
        return MomentValue{std::move(r), d};
    }
    static MomentValue of(double d) { return MomentValue{std::nullopt, d}; }
    bool is_exact() const noexcept { return exact.has_value(); }
};

struct McEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::size_t trials = 0;
};

namespace detail {

/// Weights of trial t for every vertex of the flat tree.
inline void draw_weights(const FlatTree& tree, std::uint64_t seed, std::uint64_t trial, std::vector<double>& w) {
    w.resize(tree.size());
    w[0] = 1.0;
    for (std::size_t a = 1; a < tree.size(); ++a) {
        CounterStream stream(seed, trial, a);
        double u1 = stream.next_open01();
        double u2 = stream.next_open01();
        w[a] = tree.law[a]->sample(u1, u2);
    }
}

inline std::pair<double, double> mean_and_stderr(const std::vector<double>& values) {
    CompensatedSum s;
    for (double v : values) s.add(v);
    double mean = s.value() / static_cast<double>(values.size());
    CompensatedSum ss;
    for (double v : values) ss.add((v - mean) * (v - mean));
    double var = values.size() > 1 ? ss.value() / static_cast<double>(values.size() - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

template <class Scalar>
std::vector<Scalar> binomial_row(int n) {
    std::vector<Scalar> row(static_cast<std::size_t>(n) + 1, Scalar(0));
    row[0] = Scalar(1);
    for (int i = 1; i <= n; ++i)
        for (int j = i; j >= 1; --j) row[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j - 1)];
    return row;
}

/// Moments 0..n of a sum of independent terms, combined one at a time:
/// E((A+B)^j) = Σ_i C(j,i) E(A^i) E(B^{j-i}).
template <class Scalar>
std::vector<Scalar> convolve_moments(const std::vector<Scalar>& a, const std::vector<Scalar>& b,
                                     const std::vector<std::vector<Scalar>>& binom) {
    std::size_t n = a.size() - 1;
    std::vector<Scalar> out(n + 1, Scalar(0));
    for (std::size_t j = 0; j <= n; ++j)
        for (std::size_t i = 0; i <= j; ++i) out[j] += binom[j][i] * a[i] * b[j - i];
    return out;
}

template <class Scalar>
std::vector<std::vector<Scalar>> binomial_table(int n) {
    std::vector<std::vector<Scalar>> t;
    for (int j = 0; j <= n; ++j) t.push_back(binomial_row<Scalar>(j));
    return t;
}

/// Moments of one child term p·W·B given moments of B.
template <class Scalar>
std::vector<Scalar> child_term(const Scalar& ratio, const WeightLaw& law, const std::vector<Scalar>& b_moments) {
    std::vector<Scalar> out(b_moments.size());
    Scalar rp(1);
    for (std::size_t j = 0; j < b_moments.size(); ++j) {
        out[j] = rp * law.template moment<Scalar>(static_cast<unsigned>(j)) * b_moments[j];
        rp *= ratio;
    }
    return out;
}

} // namespace detail

/// Per-trial total masses Z_1..Z_k, one row per trial.
inline std::vector<std::vector<double>> simulate_masses(const WeightModel& model, const BaseMeasure& mu, int k,
                                                        std::size_t trials, std::uint64_t seed, unsigned threads = 0) {
    model.validate(mu.shape());
    FlatTree tree(model, mu, k);
    std::vector<std::vector<double>> rows(trials, std::vector<double>(static_cast<std::size_t>(k)));
    parallel_blocks(trials, resolve_threads(static_cast<int>(threads)), [&](std::size_t begin, std::size_t end) {
        std::vector<double> w, y;
        for (std::size_t t = begin; t < end; ++t) {
            detail::draw_weights(tree, seed, t, w);
            tree.y_values(w, y);
            for (int l = 1; l <= k; ++l) rows[t][static_cast<std::size_t>(l - 1)] = FlatTree::level_sum(y, tree.begin_of(l), tree.end_of(l));
        }
    });
    return rows;
}

/// Monte Carlo estimate of E(Z_l^q) with its standard error.
inline McEstimate mc_moment(const WeightModel& model, const BaseMeasure& mu, double q, int l, std::size_t trials,
                            std::uint64_t seed, unsigned threads = 0) {
    if (trials < 2) throw ArgumentError("mc_moment needs at least 2 trials");
    if (!(q > 0)) throw ArgumentError("mc_moment: q must be > 0");
    if (l < 1 || l > mu.shape().k) throw ArgumentError("mc_moment: level outside 1..k");
    model.validate(mu.shape());
    FlatTree tree(model, mu, l);
    std::vector<double> values(trials);
    parallel_blocks(trials, resolve_threads(static_cast<int>(threads)), [&](std::size_t begin, std::size_t end) {
        std::vector<double> w, y;
        for (std::size_t t = begin; t < end; ++t) {
            detail::draw_weights(tree, seed, t, w);
            tree.y_values(w, y);
            values[t] = std::pow(FlatTree::level_sum(y, tree.begin_of(l), tree.end_of(l)), q);
        }
    });
    auto [mean, se] = detail::mean_and_stderr(values);
    return {mean, se, trials};
}

/// Moments E(Z_l^j), j = 0..n, by the subtree recursion
///   B_v = Σ_c p_c(v) W_{vc} B_{vc},  B = 1 at depth l,  Z_l = B_root,
/// where the children's terms are independent. Depth-homogeneous inputs
/// take O(l) steps; otherwise subtrees are hash-consed by structure.
template <class Scalar>
std::vector<Scalar> integer_moments(const WeightModel& model, const BaseMeasure& mu, int n, int l) {
    if (n < 0) throw ArgumentError("moment order must be >= 0");
    if (l < 0 || l > mu.shape().k) throw ArgumentError("level outside 0..k");
    model.validate(mu.shape());
    const int m = mu.shape().m;
    const auto binom = detail::binomial_table<Scalar>(n);
    const std::vector<Scalar> ones(static_cast<std::size_t>(n) + 1, Scalar(1));

    if (model.depth_homogeneous() && mu.depth_homogeneous()) {
        std::vector<Scalar> mom = ones;
        for (int d = l - 1; d >= 0; --d) {
            const auto& split = mu.depth_split(d);
            const auto& law = model.depth_law(d + 1);
            std::vector<Scalar> acc;
            for (int c = 0; c < m; ++c) {
                auto term = detail::child_term<Scalar>(as_scalar<Scalar>(split[static_cast<std::size_t>(c)]), law, mom);
                acc = c == 0 ? std::move(term) : detail::convolve_moments(acc, term, binom);
            }
            mom = std::move(acc);
        }
        return mom;
    }

    // Structural hash-consing: a subtree's moments depend only on its height,
    // its split, its children's laws and its children's structures.
    std::map<std::vector<std::intptr_t>, int> ids;
    std::vector<std::vector<Scalar>> moments_by_id;
    std::function<int(Word&)> visit = [&](Word& v) -> int {
        int height = l - static_cast<int>(v.size());
        if (height == 0) {
            auto [it, inserted] = ids.try_emplace(std::vector<std::intptr_t>{0}, static_cast<int>(moments_by_id.size()));
            if (inserted) moments_by_id.push_back(ones);
            return it->second;
        }
        const auto& split = mu.split_at(v);
        std::vector<std::intptr_t> key{height, reinterpret_cast<std::intptr_t>(&split)};
        std::vector<int> child_ids;
        std::vector<const WeightLaw*> child_laws;
        for (int c = 1; c <= m; ++c) {
            v.push_back(c);
            child_laws.push_back(&model.law_at(v));
            child_ids.push_back(visit(v));
            v.pop_back();
            key.push_back(reinterpret_cast<std::intptr_t>(child_laws.back()));
            key.push_back(child_ids.back());
        }
        auto [it, inserted] = ids.try_emplace(key, static_cast<int>(moments_by_id.size()));
        if (inserted) {
            std::vector<Scalar> acc;
            for (int c = 0; c < m; ++c) {
                auto term = detail::child_term<Scalar>(as_scalar<Scalar>(split[static_cast<std::size_t>(c)]),
                                                       *child_laws[static_cast<std::size_t>(c)],
                                                       moments_by_id[static_cast<std::size_t>(child_ids[static_cast<std::size_t>(c)])]);
                acc = c == 0 ? std::move(term) : detail::convolve_moments(acc, term, binom);
            }
            moments_by_id.push_back(std::move(acc));
        }
        return it->second;
    };
    if (vertex_count(m, l) > (std::uint64_t{1} << 24))
        throw ResourceError("non-homogeneous recursion would visit more than 2^24 vertices");
    Word root;
    int id = visit(root);
    return moments_by_id[static_cast<std::size_t>(id)];
}

/// E(Z_l^n) from the subtree recursion. Rational mode needs laws with
/// rational moments (everything except lognormal).
template <class Scalar>
Scalar exact_moment_integer(const WeightModel& model, const BaseMeasure& mu, int n, int l) {
    if (n < 1) throw ArgumentError("exact_moment_integer: n must be >= 1");
    if (l < 1) throw ArgumentError("exact_moment_integer: level must be >= 1");
    return integer_moments<Scalar>(model, mu, n, l)[static_cast<std::size_t>(n)];
}

/// E(Z_l^q) by enumerating every joint weight outcome. Probabilities and
/// Z_l are exact; a non-integer power is taken in double at the end.
inline MomentValue exact_moment_discrete(const WeightModel& model, const BaseMeasure& mu, double q, int l,
                                         std::uint64_t cap = kDefaultOutcomeCap) {
    if (!(q > 0) || !std::isfinite(q)) throw ArgumentError("exact_moment_discrete: q must be a finite real > 0");
    if (l < 1 || l > mu.shape().k) throw ArgumentError("exact_moment_discrete: level outside 1..k");
    model.validate(mu.shape());
    FlatTree tree(model, mu, l);
    OutcomeEnumerator outcomes(tree, 1, tree.size(), cap);
    const bool integral = is_integer_exponent(q);
    const unsigned qi = integral ? static_cast<unsigned>(q) : 0u;
    Rational exact_sum = 0;
    CompensatedSum float_sum;
    std::vector<Rational> weights(tree.size(), Rational(1)), y;
    outcomes.run(weights, [&](const std::vector<Rational>& w, const Rational& prob) {
        tree.y_values(w, y);
        Rational z = FlatTree::level_sum(y, tree.begin_of(l), tree.end_of(l));
        if (integral) {
            exact_sum += prob * ipow(z, qi);
        } else {
            float_sum.add(to_double(prob) * real_pow(z, q));
        }
    });
    return integral ? MomentValue::of(exact_sum) : MomentValue::of(float_sum.value());
}

/// S_l = Σ_{|u|=l} E(Y_u^q) = Σ_{|u|=l} μ(C_u)^q Π_{∅≠p⪯u} E(W_p^q).
/// Exact when q is an integer and all laws have rational moments.
inline MomentValue level_moment_sum(const WeightModel& model, const BaseMeasure& mu, double q, int l) {
    if (!(q > 0) || !std::isfinite(q)) throw ArgumentError("level_moment_sum: q must be a finite real > 0");
    if (l < 0 || l > mu.shape().k) throw ArgumentError("level_moment_sum: level outside 0..k");
    model.validate(mu.shape());
    const int m = mu.shape().m;
    const bool exact = is_integer_exponent(q) && model.all_finite_support();
    const unsigned qi = exact ? static_cast<unsigned>(q) : 0u;

    auto edge_exact = [&](const Rational& p, const WeightLaw& law) { return ipow(p, qi) * law.moment_exact(qi); };
    auto edge_real = [&](const Rational& p, const WeightLaw& law) { return std::pow(to_double(p), q) * law.moment_real(q); };

    if (model.depth_homogeneous() && mu.depth_homogeneous()) {
        Rational s_exact = 1;
        double s_real = 1.0;
        for (int d = 0; d < l; ++d) {
            const auto& split = mu.depth_split(d);
            const auto& law = model.depth_law(d + 1);
            if (exact) {
                Rational f = 0;
                for (int c = 0; c < m; ++c) f += edge_exact(split[static_cast<std::size_t>(c)], law);
                s_exact *= f;
            } else {
                double f = 0;
                for (int c = 0; c < m; ++c) f += edge_real(split[static_cast<std::size_t>(c)], law);
                s_real *= f;
            }
        }
        return exact ? MomentValue::of(s_exact) : MomentValue::of(s_real);
    }

    if (vertex_count(m, l) > (std::uint64_t{1} << 24))
        throw ResourceError("non-homogeneous level sum would visit more than 2^24 vertices");
    // T_v = Σ_c p_c(v)^q E(W_{vc}^q) T_{vc}, T = 1 at depth l.
    std::function<MomentValue(Word&)> visit = [&](Word& v) -> MomentValue {
        if (static_cast<int>(v.size()) == l) return exact ? MomentValue::of(Rational(1)) : MomentValue::of(1.0);
        const auto& split = mu.split_at(v);
        Rational te = 0;
        double tr = 0;
        for (int c = 1; c <= m; ++c) {
            v.push_back(c);
            const auto& law = model.law_at(v);
            MomentValue below = visit(v);
            v.pop_back();
            if (exact) {
                te += edge_exact(split[static_cast<std::size_t>(c - 1)], law) * *below.exact;
            } else {
                tr += edge_real(split[static_cast<std::size_t>(c - 1)], law) * below.value;
            }
        }
        return exact ? MomentValue::of(te) : MomentValue::of(tr);
    };
    Word root;
    return visit(root);
}

} // namespace cascade_lab

#endif // CASCADE_LAB_MOMENTS_HPP
