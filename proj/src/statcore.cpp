#include "fedgroup/statcore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace fedgroup {

namespace {

// Sum after sorting ascending: the result is independent of input order.
double ordered_sum(std::vector<double>& terms)
{
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms)
        s += t;
    return s;
}

} // namespace

ClassAlphabet::ClassAlphabet(std::vector<std::string> labels) : labels_(std::move(labels))
{
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_)
        if (!seen.insert(l).second)
            throw std::invalid_argument("duplicate class label '" + l + "'");
}

int ClassAlphabet::index_of(const std::string& label) const
{
    auto it = std::find(labels_.begin(), labels_.end(), label);
    return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
}

std::uint64_t LabelCounts::total() const
{
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

LabelCounts& LabelCounts::operator+=(const LabelCounts& other)
{
    if (counts.empty())
        counts.assign(other.size(), 0);
    if (other.size() != counts.size())
        throw std::invalid_argument("label counts over different alphabets");
    for (std::size_t i = 0; i < counts.size(); ++i)
        counts[i] += other.counts[i];
    return *this;
}

std::string ScoreValue::to_string() const
{
    if (is_infinite())
        return "inf";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value_);
    return std::string(buf, end);
}

ScoreValue ScoreValue::parse(const std::string& text)
{
    if (text == "inf" || text == "+inf")
        return infinity();
    double v = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size())
        throw std::invalid_argument("not a score value: '" + text + "'");
    return ScoreValue(v);
}

LabelDistribution distribution_from_counts(const LabelCounts& counts)
{
    const auto total = counts.total();
    if (total == 0)
        throw std::invalid_argument("label counts are all zero (empty dataset)");
    LabelDistribution p;
    p.probs.reserve(counts.size());
    for (auto c : counts.counts)
        p.probs.push_back(static_cast<double>(c) / static_cast<double>(total));
    return p;
}

void validate_distribution(const LabelDistribution& p)
{
    if (p.probs.empty())
        throw std::invalid_argument("empty distribution");
    double s = 0.0;
    for (double v : p.probs) {
        if (!(v >= 0.0))
            throw std::invalid_argument("distribution has a negative or NaN entry");
        s += v;
    }
    if (std::abs(s - 1.0) > kDistributionTolerance)
        throw std::invalid_argument("distribution does not sum to 1");
}

double normalized_entropy(const LabelDistribution& p, std::size_t alphabet_size)
{
    if (alphabet_size < 2)
        throw std::invalid_argument("entropy normalization needs at least two classes");
    if (p.size() != alphabet_size)
        throw std::invalid_argument("distribution length differs from alphabet size");
    validate_distribution(p);

    // The flat distribution is exactly 1, whatever the rounding of the logs.
    if (std::all_of(p.probs.begin(), p.probs.end(), [&](double v) { return v == p.probs.front(); }))
        return 1.0;

    std::vector<double> terms;
    terms.reserve(p.size());
    for (double v : p.probs)
        if (v > 0.0)
            terms.push_back(-v * std::log(v));
    const double h = ordered_sum(terms) / std::log(static_cast<double>(alphabet_size));
    return std::clamp(h, 0.0, 1.0);
}

double hellinger(const LabelDistribution& p, const LabelDistribution& q)
{
    if (p.size() != q.size())
        throw std::invalid_argument("hellinger: distributions have different lengths");
    std::vector<double> terms;
    terms.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double diff = std::sqrt(p.probs[i]) - std::sqrt(q.probs[i]);
        terms.push_back(diff * diff);
    }
    const double d = std::sqrt(ordered_sum(terms)) / std::sqrt(2.0);
    return std::min(d, 1.0);
}

ScoreValue similarity_score(std::span<const LabelDistribution> groups, std::size_t alphabet_size)
{
    if (groups.empty())
        throw std::invalid_argument("similarity score of an empty group list");

    const std::size_t n = groups.size();
    std::vector<double> inverse_entropy;
    inverse_entropy.reserve(n);
    bool degenerate = false;
    for (const auto& g : groups) {
        const double h = normalized_entropy(g, alphabet_size);
        if (h == 0.0)
            degenerate = true;
        else
            inverse_entropy.push_back(1.0 / h);
    }
    if (degenerate)
        return ScoreValue::infinity();

    const double entropy_term = ordered_sum(inverse_entropy) / static_cast<double>(n);
    if (n == 1)
        return ScoreValue(entropy_term);

    // Sum over unordered pairs; equals the ordered-pair sum divided by two.
    std::vector<double> distances;
    distances.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            distances.push_back(hellinger(groups[i], groups[j]));
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    return ScoreValue(entropy_term + ordered_sum(distances) / pairs);
}

LabelDistribution pooled_distribution(std::span<const LabelCounts> members)
{
    if (members.empty())
        throw std::invalid_argument("pooled distribution of no members");
    LabelCounts sum;
    for (const auto& m : members)
        sum += m;
    return distribution_from_counts(sum);
}

} // namespace fedgroup
