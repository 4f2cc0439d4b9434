#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace conlab {

/// Mann-Whitney U test result.
///
/// u_statistic counts pairs (x from the first sample, y from the second) with
/// x > y, ties counting one half. The z-score is taken from the second
/// sample's side, so a first sample that tends to be larger yields z < 0;
/// p_one_sided approximates P(U >= observed) under the null, i.e. the
/// evidence that the first sample is stochastically larger.
struct MwuResult {
    double u_statistic = 0.0;
    double z_score = 0.0;
    double p_one_sided = 1.0;
    double p_two_sided = 1.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    bool degenerate = false;  // every pooled value identical
};

/// Average ranks for ties, tie-corrected variance, 0.5 continuity correction.
/// Throws Error::Kind::InvalidArgument for an empty sample.
MwuResult mann_whitney_u(std::span<const double> target, std::span<const double> non_target);

/// Exact permutation p-value P(U >= U_observed) over all assignments of the
/// pooled values to the two groups. Requires n1 + n2 <= 16.
double exact_mwu_p(std::span<const double> target, std::span<const double> non_target);

/// Standard normal CDF.
double normal_cdf(double z);

struct GroupSummary {
    double mean = 0.0;
    double median = 0.0;
    std::size_t count = 0;
    double activation_pct = 0.0;  // share of values >= threshold, in percent
};

GroupSummary summarize(std::span<const double> values, double threshold);

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
double sample_stddev(std::span<const double> values);

/// Counts of percentages in [90, 100], [80, 90) and [0, 80).
struct RelevanceBins {
    std::size_t high = 0;
    std::size_t medium = 0;
    std::size_t low = 0;

    friend bool operator==(const RelevanceBins&, const RelevanceBins&) = default;
};

RelevanceBins bin_relevance(std::span<const double> percentages);

/// p-values below 1e-5 print as "< .00001"; otherwise four decimals.
std::string format_p_value(double p);

}  // namespace conlab
