#include "conlab/statistics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <vector>

#include "conlab/error.hpp"

namespace conlab {

namespace {

// Midranks (1-based) of values, plus sum over tie groups of t^3 - t.
std::vector<double> midranks(std::span<const double> values, double* tie_term) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    double ties = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i + 1;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
        const double t = static_cast<double>(j - i);
        ties += t * t * t - t;
        i = j;
    }
    if (tie_term) *tie_term = ties;
    return ranks;
}

std::vector<double> pooled(std::span<const double> a, std::span<const double> b) {
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    for (double v : all) {
        if (std::isnan(v)) throw Error(Error::Kind::InvalidArgument, "Mann-Whitney U: NaN in sample");
    }
    return all;
}

double clamp_p(double p) { return std::clamp(p, DBL_MIN, 1.0); }

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

MwuResult mann_whitney_u(std::span<const double> target, std::span<const double> non_target) {
    if (target.empty() || non_target.empty())
        throw Error(Error::Kind::InvalidArgument, "Mann-Whitney U needs two non-empty samples");
    const auto all = pooled(target, non_target);
    double tie_term = 0.0;
    const auto ranks = midranks(all, &tie_term);

    MwuResult r;
    r.n1 = target.size();
    r.n2 = non_target.size();
    const double n1 = static_cast<double>(r.n1);
    const double n2 = static_cast<double>(r.n2);
    const double n = n1 + n2;
    const double rank_sum = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(r.n1), 0.0);
    r.u_statistic = rank_sum - n1 * (n1 + 1.0) / 2.0;

    const double variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (!(variance > 0.0)) {
        r.degenerate = true;
        r.z_score = 0.0;
        r.p_one_sided = 1.0;
        r.p_two_sided = 1.0;
        return r;
    }
    const double u_other = n1 * n2 - r.u_statistic;
    const double d = u_other - n1 * n2 / 2.0;
    const double corrected = std::max(std::abs(d) - 0.5, 0.0);
    r.z_score = (d < 0 ? -corrected : corrected) / std::sqrt(variance);
    // one-sided tail P(U >= observed): the correction always moves toward the tail
    r.p_one_sided = clamp_p(normal_cdf((d + 0.5) / std::sqrt(variance)));
    r.p_two_sided = clamp_p(std::erfc(std::abs(r.z_score) / std::sqrt(2.0)));
    return r;
}

double exact_mwu_p(std::span<const double> target, std::span<const double> non_target) {
    if (target.empty() || non_target.empty())
        throw Error(Error::Kind::InvalidArgument, "exact Mann-Whitney p needs two non-empty samples");
    const std::size_t n = target.size() + non_target.size();
    if (n > 16) throw Error(Error::Kind::InvalidArgument, "exact Mann-Whitney p supports at most 16 values");
    const auto all = pooled(target, non_target);
    const auto ranks = midranks(all, nullptr);
    const std::size_t n1 = target.size();
    const double observed = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), 0.0);

    std::uint64_t total = 0;
    std::uint64_t extreme = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) sum += ranks[i];
        }
        ++total;
        // Rank sums are multiples of 0.5, so the comparison is exact.
        if (sum >= observed) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
}

GroupSummary summarize(std::span<const double> values, double threshold) {
    if (values.empty()) throw Error(Error::Kind::InvalidArgument, "cannot summarize an empty sample");
    GroupSummary s;
    s.count = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = s.count / 2;
    s.median = s.count % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    const auto hits = std::count_if(values.begin(), values.end(), [&](double v) { return v >= threshold; });
    s.activation_pct = 100.0 * static_cast<double>(hits) / static_cast<double>(s.count);
    return s;
}

double sample_stddev(std::span<const double> values) {
    if (values.empty()) throw Error(Error::Kind::InvalidArgument, "cannot take the deviation of an empty sample");
    if (values.size() == 1) return 0.0;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

RelevanceBins bin_relevance(std::span<const double> percentages) {
    RelevanceBins bins;
    for (double p : percentages) {
        if (!(p >= 0.0 && p <= 100.0))
            throw Error(Error::Kind::InvalidArgument, "relevance percentage out of [0, 100]: " + std::to_string(p));
        if (p >= 90.0)
            ++bins.high;
        else if (p >= 80.0)
            ++bins.medium;
        else
            ++bins.low;
    }
    return bins;
}

std::string format_p_value(double p) {
    if (p < 1e-5) return "< .00001";
    char buf[32];
    std::snprintf(buf, sizeof buf, p < 1e-4 ? "%.5f" : "%.4f", p);
    return buf;
}

}  // namespace conlab
