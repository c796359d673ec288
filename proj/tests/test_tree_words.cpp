#include <gtest/gtest.h>

#include <random>

#include "cascade_lab/tree_words.hpp"

using namespace cascade_lab;

TEST(TreeShape, RejectsDegenerateShapes) {
    EXPECT_THROW(TreeShape(1, 3), ArgumentError);
    EXPECT_THROW(TreeShape(2, 0), ArgumentError);
    EXPECT_NO_THROW(TreeShape(2, 1));
}

TEST(Curtail, PrefixesAndRange) {
    EXPECT_EQ(curtail(Word{1, 2, 1}, 2), (Word{1, 2}));
    EXPECT_EQ(curtail(Word{1, 2, 1}, 0), Word{});
    EXPECT_EQ(curtail(Word{2}, 1), Word{2});
    EXPECT_THROW(curtail(Word{1, 2}, 3), ArgumentError);
    EXPECT_THROW(curtail(Word{1, 2}, -1), ArgumentError);
}

TEST(Meet, LongestCommonPrefix) {
    EXPECT_EQ(meet(Word{1, 1, 2}, Word{1, 2, 1}), Word{1});
    Word i{2, 1, 2};
    EXPECT_EQ(meet(i, i), i);
    EXPECT_EQ(meet(Word{1, 2}, Word{2, 2}), Word{});
}

TEST(Meet, AlgebraicPropertiesOnRandomPairs) {
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<int> sym(1, 3), len(0, 6);
    for (int trial = 0; trial < 2000; ++trial) {
        Word a, b, c;
        for (int t = len(gen); t > 0; --t) a.push_back(sym(gen));
        for (int t = len(gen); t > 0; --t) b.push_back(sym(gen));
        for (int t = len(gen); t > 0; --t) c.push_back(sym(gen));
        EXPECT_EQ(meet(a, b), meet(b, a));
        EXPECT_TRUE(meet(a, b).is_prefix_of(a));
        EXPECT_TRUE(meet(a, b).is_prefix_of(b));
        EXPECT_EQ(meet(meet(a, b), c), meet(a, meet(b, c)));
        // longer meet means smaller distance
        if (meet_length(a, b) > meet_length(a, c)) {
            EXPECT_LT(word_distance(a, b, 3), word_distance(a, c, 3));
        }
    }
}

TEST(Words, ParseAndOrder) {
    EXPECT_EQ(Word::parse("121"), (Word{1, 2, 1}));
    EXPECT_EQ(Word::parse(""), Word{});
    EXPECT_THROW(Word::parse("10"), ArgumentError);
    EXPECT_LT(Word{1}, (Word{1, 1}));
    EXPECT_LT((Word{1, 2}), Word{2});
    EXPECT_EQ((Word{3, 1}).to_string(), "31");
}

TEST(LevelVertices, LexicographicEnumeration) {
    auto l1 = level_vertices(TreeShape(2, 3), 1);
    ASSERT_EQ(l1.size(), 2u);
    EXPECT_EQ(l1[0], Word{1});
    EXPECT_EQ(l1[1], Word{2});
    auto l0 = level_vertices(TreeShape(2, 3), 0);
    ASSERT_EQ(l0.size(), 1u);
    EXPECT_TRUE(l0[0].empty());
    auto l2 = level_vertices(TreeShape(3, 2), 2);
    ASSERT_EQ(l2.size(), 9u);
    EXPECT_EQ(l2.front(), (Word{1, 1}));
    EXPECT_EQ(l2.back(), (Word{3, 3}));
    EXPECT_TRUE(std::is_sorted(l2.begin(), l2.end()));
}

TEST(CanonicalIndex, BreadthFirstChildrenLayout) {
    const int m = 3;
    std::uint64_t expected = 0;
    for (int l = 0; l <= 3; ++l)
        for_each_word(m, l, [&](const Word& w) { EXPECT_EQ(canonical_index(w, m), expected++); });
    Word v{2, 1};
    for (int c = 1; c <= m; ++c) EXPECT_EQ(canonical_index(v.child(c), m), m * canonical_index(v, m) + c);
}

TEST(CylinderMass, UniformAndExplicitSplits) {
    TreeShape s(2, 3);
    auto uni = BaseMeasure::uniform(s);
    EXPECT_EQ(cylinder_mass(uni, Word{1, 1}), Rational(1, 4));
    EXPECT_EQ(cylinder_mass(uni, Word{}), Rational(1));

    auto split = BaseMeasure::per_depth(s, {{Rational(3, 10), Rational(7, 10)}, {Rational(1, 2), Rational(1, 2)}});
    EXPECT_EQ(cylinder_mass(split, Word{2, 1}), Rational(35, 100));
}

TEST(CylinderMass, AdditivityAndLevelSumsExact) {
    TreeShape s(3, 3);
    std::map<Word, BaseMeasure::Split> table{
        {Word{}, {Rational(1, 6), Rational(1, 3), Rational(1, 2)}},
        {Word{2}, {Rational(0), Rational(2, 5), Rational(3, 5)}},
        {Word{3, 3}, {Rational(1, 7), Rational(2, 7), Rational(4, 7)}},
    };
    auto mu = BaseMeasure::per_vertex(s, table);
    for (int l = 0; l <= 3; ++l) {
        Rational total = 0;
        for (const auto& w : level_vertices(s, l)) total += cylinder_mass(mu, w);
        EXPECT_EQ(total, Rational(1));
    }
    for (int l = 0; l < 3; ++l)
        for (const auto& v : level_vertices(s, l)) {
            Rational kids = 0;
            for (int c = 1; c <= 3; ++c) kids += cylinder_mass(mu, v.child(c));
            EXPECT_EQ(kids, cylinder_mass(mu, v));
        }
}

TEST(BaseMeasure, RejectsBadSplits) {
    TreeShape s(2, 2);
    EXPECT_THROW(BaseMeasure::per_depth(s, {{Rational(1, 2), Rational(1, 3)}}), ArgumentError);
    EXPECT_THROW(BaseMeasure::per_depth(s, {{Rational(1)}}), ArgumentError);
    EXPECT_THROW(BaseMeasure::per_depth(s, {{Rational(-1), Rational(2)}}), ArgumentError);
    EXPECT_THROW(BaseMeasure::per_vertex(s, {{Word{1, 1}, {Rational(1, 2), Rational(1, 2)}}}), ArgumentError);
}

TEST(BaseMeasure, RootPermutationRelabelsChildren) {
    TreeShape s(2, 2);
    auto mu = BaseMeasure::per_depth(s, {{Rational(3, 10), Rational(7, 10)}, {Rational(1, 4), Rational(3, 4)}});
    auto swapped = mu.with_root_split_permuted({1, 0});
    EXPECT_EQ(cylinder_mass(swapped, Word{1, 2}), cylinder_mass(mu, Word{2, 2}));
    EXPECT_EQ(cylinder_mass(swapped, Word{2, 1}), cylinder_mass(mu, Word{1, 1}));
}

TEST(Rationals, ParseExactDecimals) {
    EXPECT_EQ(parse_rational("0.35"), Rational(7, 20));
    EXPECT_EQ(parse_rational("-3/10"), Rational(-3, 10));
    EXPECT_EQ(parse_rational("2.5e-1"), Rational(1, 4));
    EXPECT_EQ(rational_from_double(0.3), Rational(3, 10));
    EXPECT_THROW(parse_rational("abc"), ArgumentError);
    EXPECT_THROW(parse_rational("1/0"), ArgumentError);
}
