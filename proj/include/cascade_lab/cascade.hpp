#ifndef CASCADE_LAB_CASCADE_HPP
#define CASCADE_LAB_CASCADE_HPP

#include <cstdint>
#include <vector>

#include "cascade_lab/errors.hpp"
#include "cascade_lab/rational.hpp"
#include "cascade_lab/rng.hpp"
#include "cascade_lab/tree_words.hpp"
#include "cascade_lab/weights.hpp"

namespace cascade_lab {

/// Largest tree a realization will materialize.
inline constexpr std::uint64_t kRealizationVertexCap = std::uint64_t{1} << 26;

/// One assignment of weights W_i to every vertex of T_k, stored in
/// breadth-first (canonical_index) order. The root slot holds 1.
template <class Scalar>
class BasicRealization {
public:
    BasicRealization(TreeShape shape, std::uint64_t seed = 0) : shape_(shape), seed_(seed) {
        auto count = vertex_count(shape.m, shape.k);
        if (count > kRealizationVertexCap) throw ResourceError("realization would exceed the vertex cap");
        weights_.assign(static_cast<std::size_t>(count), Scalar(1));
    }

    const TreeShape& shape() const noexcept { return shape_; }
    std::uint64_t seed() const noexcept { return seed_; }

    const Scalar& weight(const Word& v) const { return weights_[index_of(v)]; }
    const Scalar& weight_at(std::size_t index) const { return weights_[index]; }

    void set_weight(const Word& v, Scalar value) {
        if (v.empty()) throw ArgumentError("the root carries no weight");
        if (!(value > 0)) throw ArgumentError("weights must be strictly positive");
        weights_[index_of(v)] = std::move(value);
    }
    void set_weight_at(std::size_t index, Scalar value) { weights_[index] = std::move(value); }

    std::size_t vertex_total() const noexcept { return weights_.size(); }

private:
    std::size_t index_of(const Word& v) const {
        if (!v.valid_for(shape_.m) || static_cast<int>(v.size()) > shape_.k)
            throw ArgumentError("vertex '" + v.to_string() + "' is not in T_k");
        return static_cast<std::size_t>(canonical_index(v, shape_.m));
    }

    TreeShape shape_;
    std::uint64_t seed_;
    std::vector<Scalar> weights_;
};

using CascadeRealization = BasicRealization<double>;
using ExactRealization = BasicRealization<Rational>;

/// Draws every weight from the vertex's own counter stream, keyed by
/// (seed, trial, canonical index).
inline CascadeRealization sample_realization(const WeightModel& model, TreeShape shape, std::uint64_t seed,
                                             std::uint64_t trial = 0) {
    model.validate(shape);
    CascadeRealization r(shape, seed);
    for (int d = 1; d <= shape.k; ++d) {
        std::uint64_t index = vertex_count(shape.m, d - 1);
        for_each_word(shape.m, d, [&](const Word& v) {
            CounterStream stream(seed, trial, index);
            double u1 = stream.next_open01();
            double u2 = stream.next_open01();
            r.set_weight_at(static_cast<std::size_t>(index), model.law_at(v).sample(u1, u2));
            ++index;
        });
    }
    return r;
}

/// X_i = W_{i|1} W_{i|2} ... W_{i}.
template <class Scalar>
Scalar path_product(const BasicRealization<Scalar>& r, const Word& i) {
    if (i.empty()) throw ArgumentError("path_product: word must be nonempty");
    Scalar x(1);
    Word prefix;
    for (std::size_t t = 0; t < i.size(); ++t) {
        prefix.push_back(i[t]);
        x *= r.weight(prefix);
    }
    return x;
}

/// Y_i = X_i μ(C_i).
template <class Scalar>
Scalar y_value(const BasicRealization<Scalar>& r, const BaseMeasure& mu, const Word& i) {
    return path_product(r, i) * as_scalar<Scalar>(cylinder_mass(mu, i));
}

/// Z_l = Σ_{|i|=l} Y_i, accumulated level by level from the root.
template <class Scalar>
Scalar total_mass(const BasicRealization<Scalar>& r, const BaseMeasure& mu, int l) {
    const auto& shape = r.shape();
    if (l < 1 || l > shape.k) throw ArgumentError("total_mass: level outside 1..k");
    // mass[v] = X_v μ(C_v) for the current level, lexicographic order.
    std::vector<Scalar> mass{Scalar(1)};
    std::vector<Word> level{Word{}};
    for (int d = 0; d < l; ++d) {
        std::vector<Scalar> next_mass;
        std::vector<Word> next_level;
        next_mass.reserve(mass.size() * static_cast<std::size_t>(shape.m));
        next_level.reserve(mass.size() * static_cast<std::size_t>(shape.m));
        for (std::size_t a = 0; a < level.size(); ++a) {
            const auto& split = mu.split_at(level[a]);
            for (int c = 1; c <= shape.m; ++c) {
                Word child = level[a].child(c);
                next_mass.push_back(mass[a] * as_scalar<Scalar>(split[static_cast<std::size_t>(c - 1)]) * r.weight(child));
                next_level.push_back(std::move(child));
            }
        }
        mass = std::move(next_mass);
        level = std::move(next_level);
    }
    Scalar z(0);
    for (const auto& y : mass) z += y;
    return z;
}

} // namespace cascade_lab

#endif // CASCADE_LAB_CASCADE_HPP
