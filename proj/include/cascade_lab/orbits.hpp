#ifndef CASCADE_LAB_ORBITS_HPP
#define CASCADE_LAB_ORBITS_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "cascade_lab/errors.hpp"
#include "cascade_lab/tree_words.hpp"

namespace cascade_lab {

/// Ordered n-tuple of leaves (words of length k) below an anchor vertex.
struct LeafTuple {
    TreeShape shape;
    std::vector<Word> entries;
    Word anchor;

    LeafTuple(TreeShape s, std::vector<Word> e, Word v = {}) : shape(s), entries(std::move(e)), anchor(std::move(v)) {
        if (!anchor.valid_for(shape.m) || static_cast<int>(anchor.size()) > shape.k)
            throw ArgumentError("anchor is not a vertex of T_k");
        for (const auto& w : entries) {
            if (static_cast<int>(w.size()) != shape.k || !w.valid_for(shape.m))
                throw ArgumentError("leaf '" + w.to_string() + "' is not a word of length k over 1..m");
            if (!anchor.is_prefix_of(w)) throw ArgumentError("leaf '" + w.to_string() + "' does not descend from the anchor");
        }
    }

    std::size_t size() const noexcept { return entries.size(); }

    /// Vertex of the spanned tree T_v(entries): between the anchor and some leaf.
    bool spans(const Word& p) const {
        if (!anchor.is_prefix_of(p)) return false;
        return std::any_of(entries.begin(), entries.end(), [&](const Word& w) { return p.is_prefix_of(w); });
    }
};

/// Leaf tuple together with a distinguished vertex of its spanned tree.
struct MarkedLeafTuple {
    LeafTuple base;
    Word mark;

    MarkedLeafTuple(LeafTuple b, Word p) : base(std::move(b)), mark(std::move(p)) {
        if (base.entries.empty()) throw ArgumentError("marked tuple needs at least one leaf");
        if (!base.spans(mark)) throw ArgumentError("mark '" + mark.to_string() + "' is not a vertex of the spanned tree");
    }
};

/// Join set with multiplicities: (vertex, multiplicity) sorted by vertex.
using JoinSet = std::vector<std::pair<Word, int>>;

/// Branch vertices of the spanned tree, each with (children - 1), plus
/// repeated leaves with (copies - 1). Total multiplicity is n - 1.
inline JoinSet join_set(const LeafTuple& J) {
    if (J.size() < 2) throw ArgumentError("join_set needs n >= 2 leaves");
    std::map<Word, std::set<int>> children;  // internal vertex -> children used
    std::map<Word, int> copies;
    for (const auto& w : J.entries) {
        ++copies[w];
        for (std::size_t t = J.anchor.size(); t < w.size(); ++t) children[curtail(w, static_cast<int>(t))].insert(w[t]);
    }
    JoinSet out;
    for (const auto& [v, kids] : children)
        if (kids.size() >= 2) out.emplace_back(v, static_cast<int>(kids.size()) - 1);
    for (const auto& [w, c] : copies)
        if (c >= 2) out.emplace_back(w, c - 1);
    std::sort(out.begin(), out.end());
    return out;
}

/// Levels of the join points repeated by multiplicity, sorted ascending.
inline std::vector<int> join_levels(const LeafTuple& J) {
    std::vector<int> levels;
    for (const auto& [v, mult] : join_set(J))
        for (int i = 0; i < mult; ++i) levels.push_back(static_cast<int>(v.size()));
    std::sort(levels.begin(), levels.end());
    return levels;
}

/// Longest common prefix of all entries.
inline Word top_join(const LeafTuple& J) {
    if (J.entries.empty()) throw ArgumentError("top_join needs at least one leaf");
    Word top = J.entries.front();
    for (const auto& w : J.entries) top = meet(top, w);
    return top;
}

/// j ∧ T_v(J): the deepest prefix of j lying in the spanned tree.
inline Word meet_with_spanned_tree(const Word& j, const LeafTuple& J) {
    if (!J.anchor.is_prefix_of(j)) throw ArgumentError("j must descend from the anchor");
    std::size_t depth = J.anchor.size();
    for (const auto& w : J.entries) depth = std::max(depth, meet_length(j, w));
    return curtail(j, static_cast<int>(depth));
}

/// Orbit invariant of an ordered tuple: the meet-depth matrix
/// D[r][s] = |i_r ∧ i_s| (D[r][r] = k). Root-fixing automorphisms act by
/// the full symmetric group on the children of every vertex, so equal
/// matrices characterize orbits.
struct JoinClass {
    int n = 0;
    int k = 0;
    std::vector<int> matrix;  // row-major n×n

    int at(int r, int s) const { return matrix[static_cast<std::size_t>(r * n + s)]; }

    /// Leaf r attaches to T(i_1..i_{r-1}) at depth max_{s<r} D[r][s]; those
    /// attachment depths are the join levels.
    std::vector<int> levels() const {
        std::vector<int> out;
        for (int r = 1; r < n; ++r) {
            int d = 0;
            for (int s = 0; s < r; ++s) d = std::max(d, at(r, s));
            out.push_back(d);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    bool ultrametric() const {
        for (int r = 0; r < n; ++r)
            for (int s = 0; s < n; ++s)
                for (int t = 0; t < n; ++t)
                    if (at(r, s) < std::min(at(r, t), at(t, s))) return false;
        return true;
    }

    friend bool operator==(const JoinClass&, const JoinClass&) = default;
    friend auto operator<=>(const JoinClass& a, const JoinClass& b) {
        if (auto c = a.n <=> b.n; c != 0) return c;
        if (auto c = a.k <=> b.k; c != 0) return c;
        return a.matrix <=> b.matrix;
    }
};

/// Orbit invariant of a marked tuple: meet matrix, mark level and the set of
/// leaf indices (0-based) below the mark.
struct MarkedJoinClass {
    JoinClass base;
    int mark_level = 0;
    std::vector<int> mark_support;

    friend bool operator==(const MarkedJoinClass&, const MarkedJoinClass&) = default;
    friend auto operator<=>(const MarkedJoinClass&, const MarkedJoinClass&) = default;
};

inline JoinClass canonical_class(const LeafTuple& J) {
    JoinClass c;
    c.n = static_cast<int>(J.size());
    c.k = J.shape.k;
    c.matrix.resize(J.size() * J.size());
    for (std::size_t r = 0; r < J.size(); ++r)
        for (std::size_t s = 0; s < J.size(); ++s)
            c.matrix[r * J.size() + s] = static_cast<int>(meet_length(J.entries[r], J.entries[s]));
    return c;
}

inline MarkedJoinClass canonical_marked_class(const MarkedLeafTuple& J) {
    MarkedJoinClass c;
    c.base = canonical_class(J.base);
    c.mark_level = static_cast<int>(J.mark.size());
    for (std::size_t r = 0; r < J.base.size(); ++r)
        if (J.mark.is_prefix_of(J.base.entries[r])) c.mark_support.push_back(static_cast<int>(r));
    return c;
}

/// One canonical representative per orbit of (I_k)^n, produced by
/// labelling the children of every vertex in order of first use. For each
/// representative the callback receives the leaves, the sorted join levels
/// and the number of spanned-tree vertices at each level 0..k.
template <class F>
void for_each_canonical_tuple(const TreeShape& shape, int n, F&& visit) {
    if (n < 1) throw ArgumentError("tuple size n must be >= 1");
    const int m = shape.m, k = shape.k;
    const std::uint64_t vertices = vertex_count(m, k);
    if (vertices > (std::uint64_t{1} << 26)) throw ResourceError("tree too large for canonical enumeration");
    std::vector<int> used(static_cast<std::size_t>(vertices), 0);  // children in use, per BFS index
    std::vector<Word> leaves(static_cast<std::size_t>(n));
    std::vector<int> levels;
    std::vector<int> level_vertices(static_cast<std::size_t>(k) + 1, 0);
    std::vector<std::vector<std::uint8_t>> paths(static_cast<std::size_t>(n), std::vector<std::uint8_t>(static_cast<std::size_t>(k)));

    // place(r, t, node, fresh): choose symbol t of leaf r at BFS index node.
    // `fresh` means the leaf has already left the existing spanned tree.
    std::function<void(int, int, std::size_t, int)> place = [&](int r, int t, std::size_t node, int branch) {
        if (t == k) {
            leaves[static_cast<std::size_t>(r)] = Word(paths[static_cast<std::size_t>(r)]);
            bool pushed = r > 0;
            if (pushed) {
                levels.push_back(branch < 0 ? k : branch);
            }
            if (r + 1 == n) {
                std::vector<int> sorted = levels;
                std::sort(sorted.begin(), sorted.end());
                visit(static_cast<const std::vector<Word>&>(leaves), static_cast<const std::vector<int>&>(sorted),
                      static_cast<const std::vector<int>&>(level_vertices));
            } else {
                place(r + 1, 0, 0, -1);
            }
            if (pushed) levels.pop_back();
            return;
        }
        const int existing = used[node];
        // Continue along an existing child (only while still inside T(prev)).
        if (branch < 0) {
            for (int c = 1; c <= existing; ++c) {
                paths[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(c);
                place(r, t + 1, node * static_cast<std::size_t>(m) + static_cast<std::size_t>(c), -1);
            }
        }
        // Open a new child.
        if (existing < m) {
            int c = existing + 1;
            used[node] = c;
            ++level_vertices[static_cast<std::size_t>(t) + 1];
            if (r == 0 && t == 0) ++level_vertices[0];
            paths[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(c);
            int next_branch = branch >= 0 ? branch : (r == 0 ? 0 : t);
            place(r, t + 1, node * static_cast<std::size_t>(m) + static_cast<std::size_t>(c), next_branch);
            if (r == 0 && t == 0) --level_vertices[0];
            --level_vertices[static_cast<std::size_t>(t) + 1];
            used[node] = existing;
        }
    };
    place(0, 0, 0, -1);
}

struct ClassEntry {
    JoinClass cls;
    LeafTuple representative;
};

enum class EnumerationMode { canonical, brute_force };

/// Materializes S(n)/~ as (class, representative) pairs ordered by
/// (join levels, meet matrix).
inline std::vector<ClassEntry> enumerate_classes(const TreeShape& shape, int n,
                                                 EnumerationMode mode = EnumerationMode::canonical,
                                                 std::uint64_t cap = std::uint64_t{1} << 22) {
    if (n < 1) throw ArgumentError("tuple size n must be >= 1");
    std::map<std::pair<std::vector<int>, JoinClass>, LeafTuple> found;
    if (mode == EnumerationMode::canonical) {
        for_each_canonical_tuple(shape, n, [&](const std::vector<Word>& leaves, const std::vector<int>&, const std::vector<int>&) {
            LeafTuple J(shape, leaves);
            JoinClass c = canonical_class(J);
            found.emplace(std::make_pair(c.levels(), c), std::move(J));
            if (found.size() > cap) throw ResourceError("class count exceeds the cap");
        });
    } else {
        const std::uint64_t leaves_per_slot = vertex_count(shape.m, shape.k) - vertex_count(shape.m, shape.k - 1);
        long double raw = std::pow(static_cast<long double>(leaves_per_slot), n);
        if (raw > static_cast<long double>(cap)) throw ResourceError("raw tuple count m^(kn) exceeds the cap");
        auto leaves = level_vertices(shape, shape.k);
        std::vector<std::size_t> odo(static_cast<std::size_t>(n), 0);
        while (true) {
            std::vector<Word> entries;
            for (auto i : odo) entries.push_back(leaves[i]);
            LeafTuple J(shape, std::move(entries));
            JoinClass c = canonical_class(J);
            found.try_emplace(std::make_pair(c.levels(), c), std::move(J));
            int t = n - 1;
            while (t >= 0 && ++odo[static_cast<std::size_t>(t)] == leaves.size()) odo[static_cast<std::size_t>(t--)] = 0;
            if (t < 0) break;
        }
    }
    std::vector<ClassEntry> out;
    out.reserve(found.size());
    for (auto& [key, rep] : found) out.push_back(ClassEntry{key.second, rep});
    return out;
}

/// Every vertex of the spanned tree T(J) (from the root), sorted.
inline std::vector<Word> spanned_vertices(const LeafTuple& J) {
    std::set<Word> vs;
    for (const auto& w : J.entries)
        for (std::size_t t = J.anchor.size(); t <= w.size(); ++t) vs.insert(curtail(w, static_cast<int>(t)));
    return {vs.begin(), vs.end()};
}

/// Class counts keyed by sorted join levels (N) and by (levels, mark level) (N⁺).
struct ClassCensus {
    TreeShape shape;
    int n = 1;
    std::map<std::vector<int>, std::uint64_t> N;
    std::map<std::pair<std::vector<int>, int>, std::uint64_t> N_plus;
    std::uint64_t classes = 0;
    std::uint64_t marked_classes = 0;
};

inline ClassCensus class_census(const TreeShape& shape, int n, std::uint64_t cap = std::uint64_t{1} << 24) {
    ClassCensus census;
    census.shape = shape;
    census.n = n;
    for_each_canonical_tuple(shape, n, [&](const std::vector<Word>&, const std::vector<int>& levels, const std::vector<int>& per_level) {
        ++census.N[levels];
        ++census.classes;
        for (int l = 0; l <= shape.k; ++l) {
            auto cnt = static_cast<std::uint64_t>(per_level[static_cast<std::size_t>(l)]);
            if (cnt) {
                census.N_plus[{levels, l}] += cnt;
                census.marked_classes += cnt;
            }
        }
        if (census.classes > cap) throw ResourceError("class count exceeds the cap");
    });
    return census;
}

/// N(l_1,...,l_{n-1}) for sorted levels.
inline std::uint64_t count_N(const TreeShape& shape, int n, std::vector<int> levels) {
    if (static_cast<int>(levels.size()) != n - 1) throw ArgumentError("count_N needs exactly n-1 levels");
    for (int l : levels)
        if (l < 0 || l > shape.k) throw ArgumentError("join level outside 0..k");
    std::sort(levels.begin(), levels.end());
    auto census = class_census(shape, n);
    auto it = census.N.find(levels);
    return it == census.N.end() ? 0 : it->second;
}

/// N⁺(l_1,...,l_{n-1}; l).
inline std::uint64_t count_N_plus(const TreeShape& shape, int n, std::vector<int> levels, int l) {
    if (static_cast<int>(levels.size()) != n - 1) throw ArgumentError("count_N_plus needs exactly n-1 levels");
    if (l < 0 || l > shape.k) throw ArgumentError("mark level outside 0..k");
    std::sort(levels.begin(), levels.end());
    auto census = class_census(shape, n);
    auto it = census.N_plus.find({levels, l});
    return it == census.N_plus.end() ? 0 : it->second;
}

/// Root-fixing automorphism of T_k as one child permutation per internal
/// vertex (BFS order), applied top-down: g(vc) = g(v) π_v(c).
struct TreeAutomorphism {
    int m = 2;
    std::vector<std::vector<std::uint8_t>> perms;  // perms[bfs index][c-1] = image child

    Word apply(const Word& w) const {
        Word out;
        std::size_t node = 0;
        for (std::size_t t = 0; t < w.size(); ++t) {
            out.push_back(perms[node][static_cast<std::size_t>(w[t] - 1)]);
            node = node * static_cast<std::size_t>(m) + static_cast<std::size_t>(w[t]);
        }
        return out;
    }
};

/// Calls f(g) for every element of Aut(T_k): (m!)^{#internal vertices} maps.
template <class F>
void for_each_automorphism(const TreeShape& shape, std::uint64_t cap, F&& f) {
    const std::uint64_t internal = vertex_count(shape.m, shape.k - 1);
    std::vector<std::uint8_t> identity(static_cast<std::size_t>(shape.m));
    std::iota(identity.begin(), identity.end(), std::uint8_t{1});
    std::vector<std::vector<std::uint8_t>> all_perms;
    auto p = identity;
    do {
        all_perms.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    long double group = std::pow(static_cast<long double>(all_perms.size()), static_cast<long double>(internal));
    if (group > static_cast<long double>(cap)) throw ResourceError("automorphism group exceeds the cap");

    TreeAutomorphism g;
    g.m = shape.m;
    std::vector<std::size_t> choice(static_cast<std::size_t>(internal), 0);
    g.perms.assign(static_cast<std::size_t>(internal), identity);
    while (true) {
        for (std::size_t v = 0; v < choice.size(); ++v) g.perms[v] = all_perms[choice[v]];
        f(static_cast<const TreeAutomorphism&>(g));
        std::size_t t = 0;
        while (t < choice.size() && ++choice[t] == all_perms.size()) choice[t++] = 0;
        if (t == choice.size()) break;
    }
}

/// Orbit labels of all tuples of (I_k)^n, tuples indexed in mixed radix
/// over the lexicographic leaf order. Labels are first-occurrence numbered.
inline std::vector<int> automorphism_orbit_labels(const TreeShape& shape, int n, std::uint64_t cap = std::uint64_t{1} << 28) {
    auto leaves = level_vertices(shape, shape.k);
    const std::size_t L = leaves.size();
    std::map<Word, std::size_t> leaf_index;
    for (std::size_t i = 0; i < L; ++i) leaf_index[leaves[i]] = i;
    std::size_t total = 1;
    for (int r = 0; r < n; ++r) total *= L;

    std::vector<std::size_t> parent(total);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::uint64_t group_cap = cap / std::max<std::uint64_t>(total, 1);
    for_each_automorphism(shape, std::max<std::uint64_t>(group_cap, 1), [&](const TreeAutomorphism& g) {
        std::vector<std::size_t> image(L);
        for (std::size_t i = 0; i < L; ++i) image[i] = leaf_index.at(g.apply(leaves[i]));
        for (std::size_t t = 0; t < total; ++t) {
            std::size_t rest = t, mapped = 0, scale = 1;
            for (int r = 0; r < n; ++r) {
                mapped += image[rest % L] * scale;
                rest /= L;
                scale *= L;
            }
            std::size_t a = find(t), b = find(mapped);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    });
    std::vector<int> labels(total);
    std::map<std::size_t, int> renumber;
    for (std::size_t t = 0; t < total; ++t)
        labels[t] = renumber.try_emplace(find(t), static_cast<int>(renumber.size())).first->second;
    return labels;
}

/// Same indexing as automorphism_orbit_labels, labels from canonical_class.
inline std::vector<int> canonical_orbit_labels(const TreeShape& shape, int n) {
    auto leaves = level_vertices(shape, shape.k);
    const std::size_t L = leaves.size();
    std::size_t total = 1;
    for (int r = 0; r < n; ++r) total *= L;
    std::map<JoinClass, int> renumber;
    std::vector<int> labels(total);
    for (std::size_t t = 0; t < total; ++t) {
        std::vector<Word> entries;
        std::size_t rest = t;
        for (int r = 0; r < n; ++r) {
            entries.push_back(leaves[rest % L]);
            rest /= L;
        }
        labels[t] = renumber.try_emplace(canonical_class(LeafTuple(shape, std::move(entries))), static_cast<int>(renumber.size()))
                        .first->second;
    }
    return labels;
}

} // namespace cascade_lab

#endif // CASCADE_LAB_ORBITS_HPP
