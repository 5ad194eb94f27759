#pragma once

// Device-to-group partitions: random equal-size sampling, exhaustive
// enumeration, scoring, and the random-search cluster selection.

#include "fedgroup/statcore.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace fedgroup {

class Partition {
public:
    Partition() = default;
    // Throws std::invalid_argument unless the groups are non-empty, disjoint
    // and cover 0..device_count-1.
    Partition(std::vector<std::vector<int>> groups, int device_count);

    static Partition singletons(int device_count);
    static Partition single_group(int device_count);
    // Inverse of group_of(): assignment[d] is the group of device d.
    static Partition from_assignment(std::span<const int> assignment);

    const std::vector<std::vector<int>>& groups() const { return groups_; }
    std::size_t group_count() const { return groups_.size(); }
    int device_count() const { return device_count_; }
    std::vector<int> group_of() const;

    // Members sorted within groups, groups sorted by smallest member.
    Partition canonical() const;

    bool operator==(const Partition&) const = default;

private:
    std::vector<std::vector<int>> groups_;
    int device_count_ = 0;
};

struct ScoredRealization {
    Partition partition;
    ScoreValue score;
    std::int64_t realization_index = 0;
};

struct SearchConfig {
    std::int64_t realizations = 1000;
    int group_count = 2;
    std::uint64_t seed = 0;
    bool equal_sizes = true;
    // Skip partitions already drawn; stops early once every equal-size
    // partition has been seen.
    bool dedup = false;
};

struct ClusterSelection {
    ScoredRealization best;
    ScoredRealization worst;
    // Scores of every sampled realization, by realization index.
    std::vector<ScoreValue> scores;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

// Shuffle then chunk into groups of device_count / group_count.
Partition random_equal_partition(int device_count, int group_count, std::mt19937_64& rng);

// Every group non-empty, sizes otherwise unconstrained.
Partition random_partition(int device_count, int group_count, std::mt19937_64& rng);

// M! / ((M/N)!^N N!), or nullopt when it does not fit in 64 bits.
std::optional<std::uint64_t> count_equal_partitions(int device_count, int group_count);

// Calls `visit` once for each unordered partition into equal-size groups, in
// lexicographic order of canonical form. Stops early when `visit` returns
// false.
void for_each_equal_partition(int device_count, int group_count,
                              const std::function<bool(const Partition&)>& visit);

std::vector<Partition> enumerate_equal_partitions(int device_count, int group_count);

ScoredRealization score_partition(const Partition& partition, std::span<const LabelCounts> device_counts,
                                  std::int64_t realization_index = 0);

// Draws config.realizations random partitions and returns the lowest- and
// highest-scoring ones. Ties go to the lower realization index.
ClusterSelection select_clusters(std::span<const LabelCounts> device_counts, const SearchConfig& config);

// Brute-force minimum over all equal-size partitions. Throws
// std::invalid_argument when the partition count exceeds `cap`.
ScoredRealization exhaustive_best(std::span<const LabelCounts> device_counts, int group_count,
                                  std::uint64_t cap = kDefaultEnumerationCap);

} // namespace fedgroup
