#ifndef CASCADE_LAB_TREE_WORDS_HPP
#define CASCADE_LAB_TREE_WORDS_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cascade_lab/errors.hpp"
#include "cascade_lab/rational.hpp"

namespace cascade_lab {

/// Complete m-ary tree of depth k.
struct TreeShape {
    int m = 2;
    int k = 1;

    TreeShape() = default;
    TreeShape(int m_, int k_) : m(m_), k(k_) {
        if (m < 2) throw ArgumentError("branching factor m must be >= 2");
        if (k < 1) throw ArgumentError("depth k must be >= 1");
        if (m > 255) throw ArgumentError("branching factor m must be <= 255");
    }

    friend bool operator==(const TreeShape&, const TreeShape&) = default;
};

/// A finite word over {1,...,m}; the empty word is the root.
class Word {
public:
    Word() = default;
    Word(std::initializer_list<int> symbols) {
        symbols_.reserve(symbols.size());
        for (int s : symbols) push_back(s);
    }
    explicit Word(std::vector<std::uint8_t> symbols) : symbols_(std::move(symbols)) {
        for (auto s : symbols_)
            if (s == 0) throw ArgumentError("word symbols start at 1");
    }

    std::size_t size() const noexcept { return symbols_.size(); }
    bool empty() const noexcept { return symbols_.empty(); }
    int operator[](std::size_t i) const { return symbols_[i]; }
    const std::vector<std::uint8_t>& symbols() const noexcept { return symbols_; }

    void push_back(int s) {
        if (s < 1 || s > 255) throw ArgumentError("word symbol out of range");
        symbols_.push_back(static_cast<std::uint8_t>(s));
    }
    void pop_back() { symbols_.pop_back(); }

    Word child(int c) const {
        Word w = *this;
        w.push_back(c);
        return w;
    }

    /// Ancestor-or-self relation: *this is a curtailment of other.
    bool is_prefix_of(const Word& other) const noexcept {
        return symbols_.size() <= other.symbols_.size() &&
               std::equal(symbols_.begin(), symbols_.end(), other.symbols_.begin());
    }

    bool valid_for(int m) const noexcept {
        return std::all_of(symbols_.begin(), symbols_.end(), [m](auto s) { return s >= 1 && s <= m; });
    }

    /// Digit-string encoding ("" for the root). Requires m <= 9.
    std::string to_string() const {
        std::string out;
        out.reserve(symbols_.size());
        for (auto s : symbols_) {
            if (s > 9) throw ArgumentError("digit encoding requires symbols <= 9");
            out.push_back(static_cast<char>('0' + s));
        }
        return out;
    }

    static Word parse(std::string_view digits) {
        Word w;
        for (char c : digits) {
            if (c < '1' || c > '9') throw ArgumentError("bad word digit string: '" + std::string(digits) + "'");
            w.push_back(c - '0');
        }
        return w;
    }

    friend bool operator==(const Word&, const Word&) = default;
    friend auto operator<=>(const Word& a, const Word& b) { return a.symbols_ <=> b.symbols_; }

private:
    std::vector<std::uint8_t> symbols_;
};

/// First l symbols of i.
inline Word curtail(const Word& i, int l) {
    if (l < 0 || static_cast<std::size_t>(l) > i.size())
        throw ArgumentError("curtail: length " + std::to_string(l) + " outside 0.." + std::to_string(i.size()));
    return Word(std::vector<std::uint8_t>(i.symbols().begin(), i.symbols().begin() + l));
}

/// Length of the longest common prefix.
inline std::size_t meet_length(const Word& i, const Word& j) noexcept {
    std::size_t n = std::min(i.size(), j.size());
    std::size_t t = 0;
    while (t < n && i[t] == j[t]) ++t;
    return t;
}

/// Longest common prefix i ∧ j.
inline Word meet(const Word& i, const Word& j) { return curtail(i, static_cast<int>(meet_length(i, j))); }

/// Ultrametric d(i,j) = m^{-|i∧j|} for distinct words; 0 for equal words.
inline double word_distance(const Word& i, const Word& j, int m) {
    if (i == j) return 0.0;
    return std::pow(static_cast<double>(m), -static_cast<double>(meet_length(i, j)));
}

/// Number of vertices of T_l, i.e. (m^{l+1} - 1)/(m - 1); throws on overflow.
inline std::uint64_t vertex_count(int m, int l) {
    std::uint64_t total = 0, level = 1;
    for (int d = 0; d <= l; ++d) {
        if (total > UINT64_MAX - level) throw ResourceError("vertex count overflows 64 bits");
        total += level;
        if (d < l) {
            if (level > UINT64_MAX / static_cast<std::uint64_t>(m)) throw ResourceError("vertex count overflows 64 bits");
            level *= static_cast<std::uint64_t>(m);
        }
    }
    return total;
}

/// Breadth-first index of a vertex: root 0, then each level in
/// lexicographic order.
inline std::uint64_t canonical_index(const Word& w, int m) {
    std::uint64_t offset = w.empty() ? 0 : vertex_count(m, static_cast<int>(w.size()) - 1);
    std::uint64_t rank = 0;
    for (std::size_t t = 0; t < w.size(); ++t) rank = rank * static_cast<std::uint64_t>(m) + (w[t] - 1);
    return offset + rank;
}

/// Calls f(word) for every word of length l in lexicographic order.
template <class F>
void for_each_word(int m, int l, F&& f) {
    std::vector<std::uint8_t> symbols(static_cast<std::size_t>(l), 1);
    while (true) {
        f(Word(symbols));
        int t = l - 1;
        while (t >= 0 && symbols[static_cast<std::size_t>(t)] == m) {
            symbols[static_cast<std::size_t>(t)] = 1;
            --t;
        }
        if (t < 0) return;
        ++symbols[static_cast<std::size_t>(t)];
    }
}

/// All m^l words of length l in lexicographic order.
inline std::vector<Word> level_vertices(const TreeShape& shape, int l) {
    if (l < 0 || l > shape.k) throw ArgumentError("level_vertices: level outside 0..k");
    std::vector<Word> out;
    for_each_word(shape.m, l, [&](Word w) { out.push_back(std::move(w)); });
    return out;
}

/// Deterministic tree-consistent probability measure on the boundary,
/// given by splitting ratios (p_1,...,p_m) at each internal vertex.
/// Ratios are stored as exact rationals normalized to sum to one.
class BaseMeasure {
public:
    enum class Kind { uniform, per_depth, per_vertex };
    using Split = std::vector<Rational>;

    static BaseMeasure uniform(TreeShape shape) {
        BaseMeasure mu(shape, Kind::uniform);
        mu.uniform_split_.assign(static_cast<std::size_t>(shape.m), Rational(1, shape.m));
        return mu;
    }

    /// splits[d] applies to every vertex at depth d. A list shorter than k is
    /// repeated cyclically.
    static BaseMeasure per_depth(TreeShape shape, std::vector<Split> splits) {
        if (splits.empty()) throw ArgumentError("per_depth measure needs at least one split");
        BaseMeasure mu = uniform(shape);
        mu.kind_ = Kind::per_depth;
        for (auto& s : splits) mu.depth_splits_.push_back(normalize(s, shape.m));
        return mu;
    }

    /// Explicit splits keyed by vertex; vertices not listed split uniformly.
    static BaseMeasure per_vertex(TreeShape shape, std::map<Word, Split> splits) {
        BaseMeasure mu = uniform(shape);
        mu.kind_ = Kind::per_vertex;
        for (auto& [v, s] : splits) {
            if (!v.valid_for(shape.m) || static_cast<int>(v.size()) >= shape.k)
                throw ArgumentError("per_vertex split keyed by a non-internal vertex '" + v.to_string() + "'");
            mu.vertex_splits_.emplace(v, normalize(s, shape.m));
        }
        return mu;
    }

    const TreeShape& shape() const noexcept { return shape_; }
    Kind kind() const noexcept { return kind_; }

    /// All vertices at the same depth share their split.
    bool depth_homogeneous() const noexcept { return kind_ != Kind::per_vertex; }

    const Split& split_at(const Word& v) const {
        switch (kind_) {
        case Kind::uniform:
            return uniform_split_;
        case Kind::per_depth:
            return depth_split(static_cast<int>(v.size()));
        case Kind::per_vertex: {
            auto it = vertex_splits_.find(v);
            return it == vertex_splits_.end() ? uniform_split_ : it->second;
        }
        }
        return uniform_split_;
    }

    /// Split used at depth d; only meaningful when depth_homogeneous().
    const Split& depth_split(int d) const {
        if (kind_ == Kind::per_depth)
            return depth_splits_[static_cast<std::size_t>(d) % depth_splits_.size()];
        return uniform_split_;
    }

    const std::vector<Split>& depth_splits() const noexcept { return depth_splits_; }
    const std::map<Word, Split>& vertex_splits() const noexcept { return vertex_splits_; }

    /// Same split table with the root split's children permuted.
    BaseMeasure with_root_split_permuted(const std::vector<int>& perm) const;

private:
    BaseMeasure(TreeShape shape, Kind kind) : shape_(shape), kind_(kind) {}

    static Split normalize(const Split& s, int m) {
        if (static_cast<int>(s.size()) != m)
            throw ArgumentError("split must have exactly m = " + std::to_string(m) + " ratios");
        Rational sum = 0;
        for (const auto& p : s) {
            if (p < 0) throw ArgumentError("split ratios must be nonnegative");
            sum += p;
        }
        if (std::abs(to_double(sum) - 1.0) > 1e-12)
            throw ArgumentError("split ratios must sum to 1 (got " + to_string(sum) + ")");
        Split out;
        out.reserve(s.size());
        for (const auto& p : s) out.push_back(p / sum);
        return out;
    }

    TreeShape shape_;
    Kind kind_;
    Split uniform_split_;
    std::vector<Split> depth_splits_;
    std::map<Word, Split> vertex_splits_;
};

inline BaseMeasure BaseMeasure::with_root_split_permuted(const std::vector<int>& perm) const {
    const Split& root = split_at(Word{});
    if (static_cast<int>(perm.size()) != shape_.m) throw ArgumentError("permutation size must equal m");
    Split permuted(root.size());
    for (std::size_t c = 0; c < perm.size(); ++c) permuted[c] = root[static_cast<std::size_t>(perm[c])];
    std::map<Word, Split> table;
    if (kind_ == Kind::per_vertex) table = vertex_splits_;
    table[Word{}] = permuted;
    if (kind_ == Kind::per_depth) {
        for (int d = 1; d < shape_.k; ++d)
            for_each_word(shape_.m, d, [&](const Word& v) { table[v] = depth_split(d); });
    }
    return per_vertex(shape_, std::move(table));
}

/// μ(C_i): product of the splitting ratios along i.
inline Rational cylinder_mass(const BaseMeasure& mu, const Word& i) {
    if (static_cast<int>(i.size()) > mu.shape().k) throw ArgumentError("cylinder_mass: word longer than k");
    Rational mass = 1;
    Word prefix;
    for (std::size_t t = 0; t < i.size(); ++t) {
        mass *= mu.split_at(prefix)[static_cast<std::size_t>(i[t] - 1)];
        prefix.push_back(i[t]);
    }
    return mass;
}

} // namespace cascade_lab

template <>
struct std::hash<cascade_lab::Word> {
    std::size_t operator()(const cascade_lab::Word& w) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (auto s : w.symbols()) h = (h ^ s) * 1099511628211ull;
        return h ^ w.size();
    }
};

#endif // CASCADE_LAB_TREE_WORDS_HPP
