#pragma once

// Label-distribution statistics used to rank device groupings: normalized
// Shannon entropy, Hellinger distance and the composite similarity score.
// All functions are pure.

#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace fedgroup {

// Ordered, duplicate-free class names shared by every distribution of an
// experiment.
class ClassAlphabet {
public:
    ClassAlphabet() = default;
    explicit ClassAlphabet(std::vector<std::string> labels);

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& name(std::size_t i) const { return labels_.at(i); }

    // Index of `label`, or -1 when absent.
    int index_of(const std::string& label) const;

    bool operator==(const ClassAlphabet&) const = default;

private:
    std::vector<std::string> labels_;
};

struct LabelCounts {
    std::vector<std::uint64_t> counts;

    LabelCounts() = default;
    explicit LabelCounts(std::vector<std::uint64_t> c) : counts(std::move(c)) {}

    std::size_t size() const { return counts.size(); }
    std::uint64_t total() const;

    LabelCounts& operator+=(const LabelCounts& other);
    bool operator==(const LabelCounts&) const = default;
};

struct LabelDistribution {
    std::vector<double> probs;

    std::size_t size() const { return probs.size(); }
};

// Extended-real clustering score. Lower is better; +inf is the worst value
// and all infinities compare equal.
class ScoreValue {
public:
    constexpr ScoreValue() = default;
    constexpr explicit ScoreValue(double v) : value_(v) {}

    static constexpr ScoreValue infinity()
    {
        return ScoreValue(std::numeric_limits<double>::infinity());
    }

    constexpr double value() const { return value_; }
    constexpr bool is_infinite() const { return value_ == std::numeric_limits<double>::infinity(); }

    constexpr auto operator<=>(const ScoreValue& o) const
    {
        return value_ < o.value_ ? std::strong_ordering::less
             : value_ > o.value_ ? std::strong_ordering::greater
                                 : std::strong_ordering::equal;
    }
    constexpr bool operator==(const ScoreValue& o) const { return value_ == o.value_; }

    // "inf" for infinity, shortest round-trip decimal otherwise.
    std::string to_string() const;
    static ScoreValue parse(const std::string& text);

private:
    double value_ = 0.0;
};

// Tolerance used when validating that a distribution sums to one.
inline constexpr double kDistributionTolerance = 1e-9;

LabelDistribution distribution_from_counts(const LabelCounts& counts);

// Throws std::invalid_argument when the entries are negative or do not sum
// to one within kDistributionTolerance.
void validate_distribution(const LabelDistribution& p);

// -sum p_i ln p_i / ln K with 0 ln 0 = 0. K is the global alphabet size,
// not the number of classes present.
double normalized_entropy(const LabelDistribution& p, std::size_t alphabet_size);

double hellinger(const LabelDistribution& p, const LabelDistribution& q);

// Mean inverse group entropy plus mean pairwise Hellinger distance.
// Returns +inf when any group has zero entropy. The pairwise term is zero for
// a single group. Terms are accumulated in sorted order so the result does
// not depend on the order of `groups`.
ScoreValue similarity_score(std::span<const LabelDistribution> groups, std::size_t alphabet_size);

LabelDistribution pooled_distribution(std::span<const LabelCounts> members);

} // namespace fedgroup
