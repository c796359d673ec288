#ifndef CASCADE_LAB_FLAT_TREE_HPP
#define CASCADE_LAB_FLAT_TREE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cascade_lab/errors.hpp"
#include "cascade_lab/rational.hpp"
#include "cascade_lab/tree_words.hpp"
#include "cascade_lab/weights.hpp"

namespace cascade_lab {

/// Breadth-first materialization of T_L with, for every non-root vertex,
/// its weight law and the splitting ratio on the edge from its parent.
/// Children of index a are m*a+1 ... m*a+m.
struct FlatTree {
    int m = 2;
    int depth = 0;
    std::vector<const WeightLaw*> law;  // law[0] unused
    std::vector<Rational> ratio;        // ratio[0] = 1
    std::vector<double> ratio_d;
    std::vector<std::size_t> level_begin;  // level_begin[d] = first index at depth d; size depth+2

    FlatTree(const WeightModel& model, const BaseMeasure& mu, int L, std::uint64_t cap = std::uint64_t{1} << 26)
        : m(mu.shape().m), depth(L) {
        if (L < 0 || L > mu.shape().k) throw ArgumentError("level outside 0..k");
        std::uint64_t count = vertex_count(m, L);
        if (count > cap) throw ResourceError("tree of depth " + std::to_string(L) + " exceeds the vertex cap");
        law.assign(count, nullptr);
        ratio.assign(count, Rational(1));
        ratio_d.assign(count, 1.0);
        level_begin.push_back(0);
        for (int d = 0; d <= L; ++d) level_begin.push_back(static_cast<std::size_t>(vertex_count(m, d)));
        for (int d = 1; d <= L; ++d) {
            std::size_t index = level_begin[static_cast<std::size_t>(d)];
            for_each_word(m, d, [&](const Word& v) {
                law[index] = &model.law_at(v);
                Word parent = curtail(v, d - 1);
                ratio[index] = mu.split_at(parent)[static_cast<std::size_t>(v[static_cast<std::size_t>(d - 1)] - 1)];
                ratio_d[index] = to_double(ratio[index]);
                ++index;
            });
        }
    }

    std::size_t size() const noexcept { return law.size(); }
    std::size_t parent(std::size_t index) const noexcept { return (index - 1) / static_cast<std::size_t>(m); }
    std::size_t first_child(std::size_t index) const noexcept { return index * static_cast<std::size_t>(m) + 1; }
    std::size_t begin_of(int d) const noexcept { return level_begin[static_cast<std::size_t>(d)]; }
    std::size_t end_of(int d) const noexcept { return level_begin[static_cast<std::size_t>(d) + 1]; }

    /// Y values for all vertices: y[a] = y[parent] * ratio * W.
    template <class Scalar>
    void y_values(const std::vector<Scalar>& weights, std::vector<Scalar>& y) const {
        y.resize(size());
        y[0] = Scalar(1);
        for (std::size_t a = 1; a < size(); ++a) {
            if constexpr (std::is_same_v<Scalar, Rational>) {
                y[a] = y[parent(a)] * ratio[a] * weights[a];
            } else {
                y[a] = y[parent(a)] * ratio_d[a] * weights[a];
            }
        }
    }

    /// Z_l = Σ_{|v|=l} Y_v.
    template <class Scalar>
    static Scalar level_sum(const std::vector<Scalar>& y, std::size_t begin, std::size_t end) {
        Scalar s(0);
        for (std::size_t a = begin; a < end; ++a) s += y[a];
        return s;
    }
};

/// Enumerates every joint outcome of the finite-support weights at a set of
/// vertices (a contiguous index range or an explicit index list). Other
/// weights are left as given. The callback receives the full weight vector
/// and the outcome probability.
class OutcomeEnumerator {
public:
    OutcomeEnumerator(const FlatTree& tree, std::size_t from, std::size_t to, std::uint64_t cap)
        : OutcomeEnumerator(tree, range(from, to), cap) {}

    OutcomeEnumerator(const FlatTree& tree, std::vector<std::size_t> indices, std::uint64_t cap)
        : indices_(std::move(indices)) {
        long double count = 1;
        for (std::size_t a : indices_) {
            if (!tree.law[a]->finite_support())
                throw UnsupportedLawError("exact enumeration requires finite-support laws");
            atoms_.push_back(tree.law[a]->support());
            count *= static_cast<long double>(atoms_.back().size());
            if (count > static_cast<long double>(cap))
                throw ResourceError("outcome space exceeds the cap of " + std::to_string(cap) + " states");
            end_ = std::max(end_, a + 1);
        }
        outcomes_ = static_cast<std::uint64_t>(count);
    }

    std::uint64_t outcome_count() const noexcept { return outcomes_; }

    template <class F>
    void run(std::vector<Rational>& weights, F&& f) const {
        if (weights.size() < end_) weights.resize(end_, Rational(1));
        recurse(0, Rational(1), weights, f);
    }

private:
    static std::vector<std::size_t> range(std::size_t from, std::size_t to) {
        std::vector<std::size_t> r;
        for (std::size_t a = from; a < to; ++a) r.push_back(a);
        return r;
    }

    template <class F>
    void recurse(std::size_t pos, const Rational& prob, std::vector<Rational>& weights, F& f) const {
        if (pos == indices_.size()) {
            f(static_cast<const std::vector<Rational>&>(weights), prob);
            return;
        }
        for (const auto& [value, p] : atoms_[pos]) {
            weights[indices_[pos]] = value;
            recurse(pos + 1, prob * p, weights, f);
        }
    }

    std::vector<std::size_t> indices_;
    std::size_t end_ = 0;
    std::vector<std::vector<std::pair<Rational, Rational>>> atoms_;
    std::uint64_t outcomes_ = 1;
};

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace cascade_lab

#endif // CASCADE_LAB_FLAT_TREE_HPP
