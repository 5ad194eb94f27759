#include "fedgroup/partition.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace fedgroup {

namespace {

void check_equal_shape(int device_count, int group_count)
{
    if (group_count < 1 || device_count < 1)
        throw std::invalid_argument("device and group counts must be positive");
    if (device_count % group_count != 0)
        throw std::invalid_argument(std::to_string(group_count) + " groups do not evenly divide " +
                                    std::to_string(device_count) + " devices");
}

std::optional<std::uint64_t> checked_mul(std::uint64_t a, std::uint64_t b)
{
    unsigned __int128 r = static_cast<unsigned __int128>(a) * b;
    if (r > std::numeric_limits<std::uint64_t>::max())
        return std::nullopt;
    return static_cast<std::uint64_t>(r);
}

std::optional<std::uint64_t> binomial(std::uint64_t n, std::uint64_t k)
{
    if (k > n)
        return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > std::numeric_limits<std::uint64_t>::max())
            return std::nullopt;
    }
    return static_cast<std::uint64_t>(r);
}

// Stirling number of the second kind, for dedup targets on unequal sizes.
std::optional<std::uint64_t> count_partitions(int device_count, int group_count)
{
    std::vector<std::optional<std::uint64_t>> row(group_count + 1, 0);
    row[0] = 1;
    for (int m = 1; m <= device_count; ++m) {
        std::vector<std::optional<std::uint64_t>> next(group_count + 1, 0);
        for (int k = 1; k <= std::min(m, group_count); ++k) {
            if (!row[k] || !row[k - 1]) {
                next[k] = std::nullopt;
                continue;
            }
            auto a = checked_mul(*row[k], static_cast<std::uint64_t>(k));
            if (!a || *a > std::numeric_limits<std::uint64_t>::max() - *row[k - 1])
                next[k] = std::nullopt;
            else
                next[k] = *a + *row[k - 1];
        }
        row = std::move(next);
    }
    return row[group_count];
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t bound)
{
    return std::uniform_int_distribution<std::size_t>(0, bound - 1)(rng);
}

} // namespace

Partition::Partition(std::vector<std::vector<int>> groups, int device_count)
    : groups_(std::move(groups)), device_count_(device_count)
{
    if (groups_.empty())
        throw std::invalid_argument("partition has no groups");
    std::vector<char> seen(static_cast<std::size_t>(std::max(device_count, 0)), 0);
    std::size_t covered = 0;
    for (const auto& g : groups_) {
        if (g.empty())
            throw std::invalid_argument("partition has an empty group");
        for (int d : g) {
            if (d < 0 || d >= device_count)
                throw std::invalid_argument("device index " + std::to_string(d) + " out of range");
            if (seen[d]++)
                throw std::invalid_argument("device " + std::to_string(d) + " appears in two groups");
            ++covered;
        }
    }
    if (covered != seen.size())
        throw std::invalid_argument("partition does not cover every device");
}

Partition Partition::singletons(int device_count)
{
    std::vector<std::vector<int>> groups;
    for (int d = 0; d < device_count; ++d)
        groups.push_back({d});
    return Partition(std::move(groups), device_count);
}

Partition Partition::single_group(int device_count)
{
    std::vector<int> all(device_count);
    std::iota(all.begin(), all.end(), 0);
    return Partition({std::move(all)}, device_count);
}

Partition Partition::from_assignment(std::span<const int> assignment)
{
    int groups = 0;
    for (int g : assignment) {
        if (g < 0)
            throw std::invalid_argument("negative group index in assignment");
        groups = std::max(groups, g + 1);
    }
    std::vector<std::vector<int>> members(groups);
    for (std::size_t d = 0; d < assignment.size(); ++d)
        members[assignment[d]].push_back(static_cast<int>(d));
    return Partition(std::move(members), static_cast<int>(assignment.size()));
}

std::vector<int> Partition::group_of() const
{
    std::vector<int> out(device_count_, -1);
    for (std::size_t g = 0; g < groups_.size(); ++g)
        for (int d : groups_[g])
            out[d] = static_cast<int>(g);
    return out;
}

Partition Partition::canonical() const
{
    auto groups = groups_;
    for (auto& g : groups)
        std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    Partition p;
    p.groups_ = std::move(groups);
    p.device_count_ = device_count_;
    return p;
}

Partition random_equal_partition(int device_count, int group_count, std::mt19937_64& rng)
{
    check_equal_shape(device_count, group_count);
    std::vector<int> order(device_count);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[uniform_index(rng, i)]);

    const int size = device_count / group_count;
    std::vector<std::vector<int>> groups(group_count);
    for (int g = 0; g < group_count; ++g)
        groups[g].assign(order.begin() + g * size, order.begin() + (g + 1) * size);
    return Partition(std::move(groups), device_count);
}

Partition random_partition(int device_count, int group_count, std::mt19937_64& rng)
{
    if (group_count < 1 || group_count > device_count)
        throw std::invalid_argument("group count must be in [1, device count]");
    std::vector<int> order(device_count);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[uniform_index(rng, i)]);

    std::vector<std::vector<int>> groups(group_count);
    for (int i = 0; i < device_count; ++i) {
        const auto g = i < group_count ? static_cast<std::size_t>(i) : uniform_index(rng, group_count);
        groups[g].push_back(order[i]);
    }
    return Partition(std::move(groups), device_count);
}

std::optional<std::uint64_t> count_equal_partitions(int device_count, int group_count)
{
    check_equal_shape(device_count, group_count);
    const int size = device_count / group_count;
    std::uint64_t total = 1;
    // Each group is anchored at the smallest unassigned device.
    for (int g = 0; g < group_count; ++g) {
        auto ways = binomial(static_cast<std::uint64_t>(device_count - g * size - 1), size - 1);
        if (!ways)
            return std::nullopt;
        auto next = checked_mul(total, *ways);
        if (!next)
            return std::nullopt;
        total = *next;
    }
    return total;
}

void for_each_equal_partition(int device_count, int group_count,
                              const std::function<bool(const Partition&)>& visit)
{
    check_equal_shape(device_count, group_count);
    const int size = device_count / group_count;
    std::vector<char> used(device_count, 0);
    std::vector<std::vector<int>> groups(group_count);
    bool stop = false;

    // Fill group `g` starting after `from`; the first member of every group
    // is the smallest device not yet used, which makes group order canonical.
    std::function<void(int, int)> fill = [&](int g, int from) {
        if (stop)
            return;
        auto& group = groups[g];
        if (static_cast<int>(group.size()) == size) {
            if (g + 1 == group_count) {
                stop = !visit(Partition(groups, device_count));
                return;
            }
            int anchor = 0;
            while (used[anchor])
                ++anchor;
            used[anchor] = 1;
            groups[g + 1].push_back(anchor);
            fill(g + 1, anchor + 1);
            groups[g + 1].pop_back();
            used[anchor] = 0;
            return;
        }
        for (int d = from; d < device_count && !stop; ++d) {
            if (used[d])
                continue;
            used[d] = 1;
            group.push_back(d);
            fill(g, d + 1);
            group.pop_back();
            used[d] = 0;
        }
    };

    used[0] = 1;
    groups[0].push_back(0);
    fill(0, 1);
}

std::vector<Partition> enumerate_equal_partitions(int device_count, int group_count)
{
    std::vector<Partition> out;
    for_each_equal_partition(device_count, group_count, [&](const Partition& p) {
        out.push_back(p);
        return true;
    });
    return out;
}

ScoredRealization score_partition(const Partition& partition, std::span<const LabelCounts> device_counts,
                                  std::int64_t realization_index)
{
    if (static_cast<int>(device_counts.size()) != partition.device_count())
        throw std::invalid_argument("partition covers " + std::to_string(partition.device_count()) +
                                    " devices but " + std::to_string(device_counts.size()) +
                                    " label counts were given");
    if (device_counts.empty())
        throw std::invalid_argument("no devices to score");
    const std::size_t classes = device_counts.front().size();

    std::vector<LabelDistribution> pooled;
    pooled.reserve(partition.group_count());
    std::vector<LabelCounts> members;
    for (const auto& g : partition.groups()) {
        members.clear();
        for (int d : g)
            members.push_back(device_counts[d]);
        pooled.push_back(pooled_distribution(members));
    }
    return {partition, similarity_score(pooled, classes), realization_index};
}

ClusterSelection select_clusters(std::span<const LabelCounts> device_counts, const SearchConfig& config)
{
    const int devices = static_cast<int>(device_counts.size());
    if (config.realizations < 1)
        throw std::invalid_argument("at least one realization is required");
    if (config.equal_sizes)
        check_equal_shape(devices, config.group_count);
    else if (config.group_count < 1 || config.group_count > devices)
        throw std::invalid_argument("group count must be in [1, device count]");

    std::mt19937_64 rng(config.seed);
    auto draw = [&] {
        return config.equal_sizes ? random_equal_partition(devices, config.group_count, rng)
                                  : random_partition(devices, config.group_count, rng);
    };

    std::vector<ScoredRealization> realizations;
    if (config.dedup) {
        auto available = config.equal_sizes ? count_equal_partitions(devices, config.group_count)
                                            : count_partitions(devices, config.group_count);
        const auto target = static_cast<std::uint64_t>(config.realizations);
        const auto wanted = available ? std::min(*available, target) : target;
        // Coupon-collector headroom; bounds the loop if the RNG misbehaves.
        const std::uint64_t max_draws = 64 * wanted + 10'000;
        std::set<std::vector<std::vector<int>>> seen;
        for (std::uint64_t draws = 0; realizations.size() < wanted && draws < max_draws; ++draws) {
            auto p = draw();
            if (!seen.insert(p.canonical().groups()).second)
                continue;
            realizations.push_back(score_partition(p, device_counts, static_cast<std::int64_t>(realizations.size())));
        }
    } else {
        realizations.reserve(static_cast<std::size_t>(config.realizations));
        for (std::int64_t k = 0; k < config.realizations; ++k)
            realizations.push_back(score_partition(draw(), device_counts, k));
    }

    std::vector<std::size_t> order(realizations.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return realizations[a].score < realizations[b].score; });

    ClusterSelection out;
    out.best = realizations[order.front()];
    const ScoreValue top = realizations[order.back()].score;
    auto first_top = std::find_if(order.begin(), order.end(), [&](std::size_t i) { return realizations[i].score == top; });
    out.worst = realizations[*first_top];
    out.scores.reserve(realizations.size());
    for (const auto& r : realizations)
        out.scores.push_back(r.score);
    return out;
}

ScoredRealization exhaustive_best(std::span<const LabelCounts> device_counts, int group_count, std::uint64_t cap)
{
    const int devices = static_cast<int>(device_counts.size());
    auto total = count_equal_partitions(devices, group_count);
    if (!total || *total > cap)
        throw std::invalid_argument("exhaustive search over " +
                                    (total ? std::to_string(*total) : std::string("> 2^64")) +
                                    " partitions exceeds the cap of " + std::to_string(cap));

    std::optional<ScoredRealization> best;
    std::int64_t index = 0;
    for_each_equal_partition(devices, group_count, [&](const Partition& p) {
        auto scored = score_partition(p, device_counts, index++);
        if (!best || scored.score < best->score)
            best = std::move(scored);
        return true;
    });
    return *best;
}

} // namespace fedgroup
