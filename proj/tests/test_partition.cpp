#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedgroup/partition.hpp"

#include <set>

using namespace fedgroup;

namespace {

// Devices A, A, B, B as one-hot label counts.
std::vector<LabelCounts> aabb()
{
    return {LabelCounts({10, 0}), LabelCounts({10, 0}), LabelCounts({0, 10}), LabelCounts({0, 10})};
}

void check_valid_equal(const Partition& p, int m, int n)
{
    REQUIRE(p.group_count() == static_cast<std::size_t>(n));
    std::set<int> all;
    for (const auto& g : p.groups()) {
        CHECK(g.size() == static_cast<std::size_t>(m / n));
        all.insert(g.begin(), g.end());
    }
    CHECK(all.size() == static_cast<std::size_t>(m));
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == m - 1);
}

} // namespace

TEST_CASE("Partition validation")
{
    CHECK_NOTHROW(Partition({{0, 2}, {1}}, 3));
    CHECK_THROWS_AS(Partition({{0, 1}, {1}}, 2), std::invalid_argument);
    CHECK_THROWS_AS(Partition({{0}, {}}, 1), std::invalid_argument);
    CHECK_THROWS_AS(Partition({{0}}, 2), std::invalid_argument);
    CHECK_THROWS_AS(Partition({{0, 5}}, 2), std::invalid_argument);
}

TEST_CASE("Partition helpers")
{
    const Partition p({{3, 1}, {2, 0}}, 4);
    CHECK(p.group_of() == std::vector<int>{1, 0, 1, 0});
    CHECK(Partition::from_assignment(p.group_of()).canonical() == p.canonical());
    CHECK(p.canonical().groups() == std::vector<std::vector<int>>{{0, 2}, {1, 3}});
    CHECK(Partition::singletons(3).groups().size() == 3);
    CHECK(Partition::single_group(3).groups().front() == std::vector<int>{0, 1, 2});
}

TEST_CASE("random_equal_partition")
{
    std::mt19937_64 rng(11);
    SUBCASE("M=2, N=2 is forced")
    {
        const auto p = random_equal_partition(2, 2, rng).canonical();
        CHECK(p.groups() == std::vector<std::vector<int>>{{0}, {1}});
    }
    SUBCASE("M=4, N=1 is a single group")
    {
        const auto p = random_equal_partition(4, 1, rng).canonical();
        CHECK(p.groups() == std::vector<std::vector<int>>{{0, 1, 2, 3}});
    }
    SUBCASE("M=16, N=4 gives four groups of four")
    {
        for (int i = 0; i < 50; ++i)
            check_valid_equal(random_equal_partition(16, 4, rng), 16, 4);
    }
    SUBCASE("N must divide M")
    {
        CHECK_THROWS_AS(random_equal_partition(7, 2, rng), std::invalid_argument);
        CHECK_THROWS_AS(random_equal_partition(4, 0, rng), std::invalid_argument);
    }
}

TEST_CASE("random_partition keeps every group non-empty")
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto p = random_partition(7, 3, rng);
        CHECK(p.group_count() == 3);
        for (const auto& g : p.groups())
            CHECK(!g.empty());
    }
}

TEST_CASE("partition counts and enumeration")
{
    CHECK(count_equal_partitions(4, 2) == 3u);
    CHECK(count_equal_partitions(2, 2) == 1u);
    CHECK(count_equal_partitions(6, 3) == 15u);
    CHECK(count_equal_partitions(8, 4) == 105u);
    CHECK(count_equal_partitions(16, 4) == 2627625u);
    CHECK(count_equal_partitions(16, 16) == 1u);
    CHECK(!count_equal_partitions(200, 2).has_value());

    for (auto [m, n] : {std::pair{4, 2}, {2, 2}, {6, 3}, {8, 2}, {8, 4}, {9, 3}}) {
        const auto all = enumerate_equal_partitions(m, n);
        CHECK(all.size() == *count_equal_partitions(m, n));
        std::set<std::vector<std::vector<int>>> unique;
        for (const auto& p : all) {
            check_valid_equal(p, m, n);
            CHECK(p == p.canonical());
            unique.insert(p.groups());
        }
        CHECK(unique.size() == all.size());
    }
}

TEST_CASE("for_each_equal_partition stops early")
{
    int seen = 0;
    for_each_equal_partition(6, 3, [&](const Partition&) { return ++seen < 4; });
    CHECK(seen == 4);
}

TEST_CASE("score_partition")
{
    const auto counts = aabb();
    CHECK(score_partition(Partition({{0, 2}, {1, 3}}, 4), counts).score.value() == 1.0);
    CHECK(score_partition(Partition({{0, 1}, {2, 3}}, 4), counts).score.is_infinite());

    const auto single = score_partition(Partition::single_group(4), counts);
    CHECK(single.score.value() == 1.0);

    // Unequal sizes are accepted.
    std::vector<LabelCounts> three{LabelCounts({3, 1}), LabelCounts({1, 3}), LabelCounts({2, 2})};
    const auto s = score_partition(Partition({{0, 1}, {2}}, 3), three);
    CHECK(s.score.value() == 1.0);
    CHECK_THROWS_AS(score_partition(Partition({{0, 1}}, 2), three), std::invalid_argument);
}

TEST_CASE("select_clusters")
{
    SUBCASE("AABB with full coverage")
    {
        SearchConfig cfg;
        cfg.realizations = 3;
        cfg.group_count = 2;
        cfg.dedup = true;
        const auto sel = select_clusters(aabb(), cfg);
        CHECK(sel.best.score.value() == 1.0);
        CHECK(sel.worst.score.is_infinite());
        CHECK(sel.scores.size() == 3);
    }
    SUBCASE("identical devices give equal best and worst")
    {
        std::vector<LabelCounts> same(6, LabelCounts({4, 3, 3}));
        SearchConfig cfg;
        cfg.realizations = 50;
        cfg.group_count = 3;
        const auto sel = select_clusters(same, cfg);
        CHECK(sel.best.score == sel.worst.score);
        CHECK(sel.best.realization_index == 0);
        CHECK(sel.worst.realization_index == 0);
    }
    SUBCASE("N = M yields the singleton partition whatever the seed")
    {
        std::vector<LabelCounts> counts;
        for (int d = 0; d < 16; ++d)
            counts.push_back(LabelCounts({static_cast<std::uint64_t>(d + 1), 5, 7, 3}));
        SearchConfig cfg;
        cfg.group_count = 16;
        cfg.realizations = 10;
        cfg.seed = 1;
        const auto a = select_clusters(counts, cfg);
        cfg.seed = 99;
        const auto b = select_clusters(counts, cfg);
        CHECK(a.best.score == b.best.score);
        CHECK(a.best.score == score_partition(Partition::singletons(16), counts).score);
    }
    SUBCASE("dedup stops at the number of distinct partitions")
    {
        SearchConfig cfg;
        cfg.realizations = 1000;
        cfg.group_count = 3;
        cfg.dedup = true;
        std::vector<LabelCounts> counts(6, LabelCounts({1, 2}));
        CHECK(select_clusters(counts, cfg).scores.size() == 15);
    }
    SUBCASE("deterministic for a seed")
    {
        std::vector<LabelCounts> counts;
        for (int d = 0; d < 8; ++d)
            counts.push_back(LabelCounts({static_cast<std::uint64_t>(1 + d * 3 % 7), static_cast<std::uint64_t>(9 - d), 4}));
        SearchConfig cfg;
        cfg.realizations = 40;
        cfg.group_count = 4;
        cfg.seed = 5;
        const auto a = select_clusters(counts, cfg);
        const auto b = select_clusters(counts, cfg);
        CHECK(a.best.partition == b.best.partition);
        CHECK(a.scores == b.scores);
        CHECK(a.best.score <= a.worst.score);
        for (auto s : a.scores) {
            CHECK(a.best.score <= s);
            CHECK(s <= a.worst.score);
        }
    }
    SUBCASE("invalid configurations")
    {
        SearchConfig cfg;
        cfg.group_count = 3;
        CHECK_THROWS_AS(select_clusters(aabb(), cfg), std::invalid_argument);
        cfg.group_count = 2;
        cfg.realizations = 0;
        CHECK_THROWS_AS(select_clusters(aabb(), cfg), std::invalid_argument);
    }
}

TEST_CASE("exhaustive_best")
{
    const auto best = exhaustive_best(aabb(), 2);
    CHECK(best.score.value() == 1.0);
    CHECK(best.partition.canonical().groups() == std::vector<std::vector<int>>{{0, 2}, {1, 3}});

    std::vector<LabelCounts> two{LabelCounts({1, 2}), LabelCounts({2, 1})};
    CHECK(exhaustive_best(two, 2).partition.canonical() == Partition({{0}, {1}}, 2));

    std::vector<LabelCounts> many(16, LabelCounts({1, 1}));
    CHECK_THROWS_AS(exhaustive_best(many, 4, 1000), std::invalid_argument);
}

TEST_CASE("exhaustive_best agrees with full-coverage random search on 8 devices")
{
    std::vector<LabelCounts> counts;
    for (int d = 0; d < 8; ++d) {
        std::vector<std::uint64_t> c(4, 5);
        c[d % 4] = 90;
        c[(d + 1) % 4] += static_cast<std::uint64_t>(d);
        counts.push_back(LabelCounts(c));
    }
    SearchConfig cfg;
    cfg.group_count = 4;
    cfg.realizations = 105;
    cfg.dedup = true;
    const auto sel = select_clusters(counts, cfg);
    const auto best = exhaustive_best(counts, 4);
    CHECK(sel.best.score == best.score);
    // Every group pairs two devices dominated by different classes.
    for (const auto& g : best.partition.groups())
        CHECK(g[0] % 4 != g[1] % 4);
}
