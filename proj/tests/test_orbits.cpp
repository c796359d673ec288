#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>

#include "cascade_lab/counting.hpp"
#include "cascade_lab/orbits.hpp"

using namespace cascade_lab;

namespace {

LeafTuple tuple(int m, int k, std::vector<Word> e, Word v = {}) { return LeafTuple(TreeShape(m, k), std::move(e), std::move(v)); }

// Independent orbit oracle: union-find over (I_k)^n where the only moves are
// the generators "swap children c and c+1 below vertex u".
std::size_t generator_orbit_count(const TreeShape& s, int n) {
    auto leaves = level_vertices(s, s.k);
    std::map<Word, std::size_t> index;
    for (std::size_t i = 0; i < leaves.size(); ++i) index[leaves[i]] = i;
    std::size_t total = 1;
    for (int r = 0; r < n; ++r) total *= leaves.size();
    std::vector<std::size_t> parent(total);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (int d = 0; d < s.k; ++d)
        for (const auto& u : level_vertices(s, d))
            for (int c = 1; c < s.m; ++c) {
                auto swap_leaf = [&](const Word& w) {
                    if (!u.is_prefix_of(w)) return w;
                    auto sym = w.symbols();
                    auto& x = sym[u.size()];
                    if (x == c) x = static_cast<std::uint8_t>(c + 1);
                    else if (x == c + 1) x = static_cast<std::uint8_t>(c);
                    return Word(sym);
                };
                for (std::size_t t = 0; t < total; ++t) {
                    std::size_t rest = t, img = 0, scale = 1;
                    for (int r = 0; r < n; ++r) {
                        img += index[swap_leaf(leaves[rest % leaves.size()])] * scale;
                        rest /= leaves.size();
                        scale *= leaves.size();
                    }
                    parent[find(t)] = find(img);
                }
            }
    std::set<std::size_t> roots;
    for (std::size_t t = 0; t < total; ++t) roots.insert(find(t));
    return roots.size();
}

} // namespace

TEST(JoinSet, Examples) {
    auto J = tuple(2, 3, {Word{1, 1, 2}, Word{1, 2, 1}, Word{1, 2, 2}});
    JoinSet expected{{Word{1}, 1}, {Word{1, 2}, 1}};
    EXPECT_EQ(join_set(J), expected);
    EXPECT_EQ(join_levels(J), (std::vector<int>{1, 2}));

    auto R = tuple(2, 2, {Word{2, 1}, Word{2, 1}});
    EXPECT_EQ(join_set(R), (JoinSet{{Word{2, 1}, 1}}));
    EXPECT_EQ(join_levels(R), (std::vector<int>{2}));

    auto T = tuple(3, 1, {Word{1}, Word{2}, Word{3}});
    EXPECT_EQ(join_set(T), (JoinSet{{Word{}, 2}}));
    EXPECT_EQ(join_levels(T), (std::vector<int>{0, 0}));

    EXPECT_THROW(join_set(tuple(2, 2, {Word{1, 1}})), ArgumentError);
}

TEST(JoinSet, TotalMultiplicityOnRandomTuples) {
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 10000; ++trial) {
        int m = 2 + static_cast<int>(gen() % 3), k = 1 + static_cast<int>(gen() % 5), n = 2 + static_cast<int>(gen() % 5);
        std::vector<Word> e;
        for (int r = 0; r < n; ++r) {
            Word w;
            for (int t = 0; t < k; ++t) w.push_back(1 + static_cast<int>(gen() % static_cast<unsigned>(m)));
            e.push_back(w);
        }
        LeafTuple J(TreeShape(m, k), e);
        int total = 0;
        for (const auto& [v, mult] : join_set(J)) total += mult;
        ASSERT_EQ(total, n - 1);
        ASSERT_EQ(join_levels(J), canonical_class(J).levels());
    }
}

TEST(TopJoin, Examples) {
    EXPECT_EQ(top_join(tuple(2, 3, {Word{1, 1, 2}, Word{1, 2, 1}, Word{1, 2, 2}})), Word{1});
    EXPECT_EQ(top_join(tuple(2, 2, {Word{2, 1}})), (Word{2, 1}));
    EXPECT_EQ(top_join(tuple(2, 2, {Word{1, 1}, Word{2, 1}})), Word{});
}

TEST(SpannedTree, MeetExamples) {
    auto J = tuple(2, 2, {Word{1, 1}, Word{1, 2}});
    EXPECT_EQ(meet_with_spanned_tree(Word{1, 1}, J), (Word{1, 1}));
    EXPECT_EQ(meet_with_spanned_tree(Word{2, 1}, J), Word{});
    auto K = tuple(2, 3, {Word{1, 1, 1}, Word{1, 2, 1}});
    EXPECT_EQ(meet_with_spanned_tree(Word{1, 1, 2}, K), (Word{1, 1}));
    auto anchored = tuple(2, 3, {Word{2, 1, 1}}, Word{2});
    EXPECT_EQ(meet_with_spanned_tree(Word{2, 2, 2}, anchored), Word{2});
}

TEST(CanonicalClass, ExamplesAndInvariance) {
    auto a = canonical_class(tuple(2, 1, {Word{1}, Word{1}}));
    auto b = canonical_class(tuple(2, 1, {Word{2}, Word{2}}));
    auto c = canonical_class(tuple(2, 1, {Word{1}, Word{2}}));
    auto d = canonical_class(tuple(2, 1, {Word{2}, Word{1}}));
    EXPECT_EQ(a, b);
    EXPECT_EQ(c, d);
    EXPECT_NE(a, c);
    auto e = canonical_class(tuple(2, 2, {Word{1, 1}, Word{1, 2}}));
    auto f = canonical_class(tuple(2, 2, {Word{2, 1}, Word{2, 2}}));
    EXPECT_EQ(e, f);
    EXPECT_EQ(e.matrix, (std::vector<int>{2, 1, 1, 2}));

    // random automorphisms preserve the class
    std::mt19937_64 gen(5);
    TreeShape s(3, 3);
    for (int trial = 0; trial < 200; ++trial) {
        TreeAutomorphism g;
        g.m = 3;
        for (std::uint64_t v = 0; v < vertex_count(3, 2); ++v) {
            std::vector<std::uint8_t> p{1, 2, 3};
            std::shuffle(p.begin(), p.end(), gen);
            g.perms.push_back(p);
        }
        std::vector<Word> e1, e2;
        for (int r = 0; r < 4; ++r) {
            Word w;
            for (int t = 0; t < 3; ++t) w.push_back(1 + static_cast<int>(gen() % 3));
            e1.push_back(w);
            e2.push_back(g.apply(w));
        }
        auto c1 = canonical_class(LeafTuple(s, e1));
        EXPECT_EQ(c1, canonical_class(LeafTuple(s, e2)));
        EXPECT_TRUE(c1.ultrametric());
    }
}

TEST(CanonicalClass, MarkedExamples) {
    auto J = tuple(2, 2, {Word{1, 1}, Word{1, 2}});
    auto top = canonical_marked_class(MarkedLeafTuple(J, top_join(J)));
    EXPECT_EQ(top.mark_level, 1);
    EXPECT_EQ(top.mark_support, (std::vector<int>{0, 1}));
    auto leaf = canonical_marked_class(MarkedLeafTuple(J, Word{1, 1}));
    EXPECT_EQ(leaf.mark_level, 2);
    EXPECT_EQ(leaf.mark_support, (std::vector<int>{0}));
    EXPECT_THROW(MarkedLeafTuple(J, Word{2}), ArgumentError);
    EXPECT_THROW(MarkedLeafTuple(J, Word{2, 1}), ArgumentError);
}

TEST(Enumeration, ClassCounts) {
    EXPECT_EQ(enumerate_classes(TreeShape(2, 1), 2).size(), 2u);
    EXPECT_EQ(enumerate_classes(TreeShape(2, 2), 2).size(), 3u);
    EXPECT_EQ(enumerate_classes(TreeShape(3, 3), 1).size(), 1u);
    for (int m : {2, 3})
        for (int k : {1, 2, 3})
            for (int n : {1, 2, 3}) {
                if (m == 3 && k == 3) continue;
                TreeShape s(m, k);
                auto canon = enumerate_classes(s, n, EnumerationMode::canonical);
                auto brute = enumerate_classes(s, n, EnumerationMode::brute_force);
                ASSERT_EQ(canon.size(), brute.size());
                for (std::size_t i = 0; i < canon.size(); ++i) EXPECT_EQ(canon[i].cls, brute[i].cls);
                EXPECT_EQ(canon.size(), generator_orbit_count(s, n)) << "m=" << m << " k=" << k << " n=" << n;
            }
    EXPECT_THROW(enumerate_classes(TreeShape(2, 6), 4, EnumerationMode::brute_force, 1000), ResourceError);
}

TEST(Enumeration, CanonicalPartitionMatchesGroupPartition) {
    for (auto [m, k, n] : std::vector<std::tuple<int, int, int>>{{2, 1, 3}, {2, 2, 3}, {2, 3, 2}, {3, 1, 3}, {3, 2, 2}}) {
        TreeShape s(m, k);
        EXPECT_EQ(automorphism_orbit_labels(s, n), canonical_orbit_labels(s, n)) << m << " " << k << " " << n;
    }
    EXPECT_THROW(automorphism_orbit_labels(TreeShape(3, 3), 2, 1000), ResourceError);
}

TEST(Counting, SmallCensusValues) {
    TreeShape s(2, 2);
    EXPECT_EQ(count_N(s, 2, {0}), 1u);
    EXPECT_EQ(count_N(s, 2, {1}), 1u);
    EXPECT_EQ(count_N(s, 2, {2}), 1u);
    for (int l = 0; l <= 5; ++l) EXPECT_EQ(count_N(TreeShape(3, 5), 2, {l}), 1u);
    // ordered triples with join levels l1 < l2: which index splits off first
    EXPECT_EQ(count_N(TreeShape(2, 3), 3, {0, 2}), 3u);
    EXPECT_EQ(count_N(TreeShape(2, 3), 3, {3, 3}), 1u);
    EXPECT_EQ(count_N(TreeShape(2, 3), 3, {1, 1}), 0u);
    EXPECT_EQ(count_N(TreeShape(3, 3), 3, {1, 1}), 1u);
    // marked pairs: one mark per spanned-tree vertex at the level
    EXPECT_EQ(count_N_plus(TreeShape(2, 3), 2, {1}, 0), 1u);
    EXPECT_EQ(count_N_plus(TreeShape(2, 3), 2, {1}, 2), 2u);
    EXPECT_THROW(count_N(s, 3, {0}), ArgumentError);
}

TEST(Counting, CensusAgreesWithEnumerationAndLevelsAreClassInvariant) {
    for (int m : {2, 3})
        for (int n : {2, 3, 4}) {
            TreeShape s(m, 3);
            auto census = class_census(s, n);
            auto classes = enumerate_classes(s, n);
            EXPECT_EQ(census.classes, classes.size());
            std::uint64_t marks = 0;
            for (const auto& c : classes) {
                EXPECT_EQ(join_levels(c.representative), c.cls.levels());
                marks += spanned_vertices(c.representative).size();
            }
            EXPECT_EQ(census.marked_classes, marks);
        }
}

TEST(Partitions, ExamplesAndGeneratingFunction) {
    EXPECT_EQ(partition_count(0, 4), 1u);
    EXPECT_EQ(partition_count(3, 2), 2u);
    EXPECT_EQ(partition_count(4, 3), 4u);
    for (int parts = 1; parts <= 4; ++parts)
        for (int r = 0; r <= 30; ++r) {
            // brute force: nondecreasing sequences
            std::uint64_t brute = 0;
            std::function<void(int, int, int)> rec = [&](int left, int slots, int min) {
                if (slots == 0) {
                    brute += left == 0;
                    return;
                }
                for (int x = min; x * slots <= left; ++x) rec(left - x, slots - 1, x);
            };
            rec(r, parts, 0);
            EXPECT_EQ(partition_count(r, parts), brute);
            EXPECT_LE(partition_count(r, parts), std::pow(r + 1.0, parts - 1));
        }
}

TEST(Bounds, SeriesValues) {
    EXPECT_EQ(bound_M(0.5, 1), 1.0);
    double m2 = bound_M(0.5, 2);
    EXPECT_GE(m2, 2.0);
    EXPECT_NEAR(m2, 2.0, 1e-8);
    for (int n = 2; n <= 5; ++n)
        for (double lam : {0.3, 0.6, 0.9}) {
            double product = 1;  // Σ_r P(r) λ^r for n-1 parts
            for (int j = 1; j <= n - 1; ++j) product /= 1 - std::pow(lam, j);
            double M = bound_M(lam, n);
            EXPECT_GE(M, factorial(n - 1) * product);
            EXPECT_LE(M, factorial(n - 1) * product * (1 + 1e-8));
            for (double eps : {0.25, 0.5, 0.75})
                EXPECT_NEAR(bound_M_plus(lam, eps, n), factorial(n) * product / (1 - std::pow(lam, eps)),
                            1e-8 * bound_M_plus(lam, eps, n));
        }
    EXPECT_THROW(bound_M(1.0, 2), ArgumentError);
    EXPECT_THROW(bound_M(0.0, 2), ArgumentError);
    EXPECT_THROW(bound_M_plus(0.5, 1.0, 2), ArgumentError);
}

TEST(Bounds, WeightedSumsGrowWithDepth) {
    for (int n = 2; n <= 4; ++n) {
        double prev = 0, prev_plus = 0;
        for (int k = 1; k <= 8; ++k) {
            auto census = class_census(TreeShape(2, k), n);
            double s = lemma41_sum(census, 0.6), sp = lemma41_sum_plus(census, 0.6, 0.5);
            EXPECT_GE(s, prev);
            EXPECT_GE(sp, prev_plus);
            prev = s;
            prev_plus = sp;
        }
    }
}
