#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "conlab/induction.hpp"
#include "conlab/knowledge_base.hpp"
#include "conlab/statistics.hpp"

namespace conlab {

/// Images x neurons grid of non-negative activation values. Rows are images,
/// columns neurons.
class ActivationMatrix {
public:
    ActivationMatrix() = default;
    /// Throws Error::Kind::Format on negative/non-finite values, duplicate image
    /// names or a row count that does not match the name list.
    ActivationMatrix(std::vector<std::string> image_names, Eigen::MatrixXd values);

    std::size_t image_count() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t neuron_count() const noexcept { return static_cast<std::size_t>(values_.cols()); }

    const std::vector<std::string>& image_names() const noexcept { return names_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const Eigen::VectorXd& per_neuron_max() const noexcept { return max_; }
    double value(std::size_t row, std::size_t neuron) const { return values_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(neuron)); }

    std::optional<std::size_t> find_row(std::string_view image) const;
    /// Throws Error::Kind::NotFound for unknown images.
    std::size_t row(std::string_view image) const;

    friend bool operator==(const ActivationMatrix& a, const ActivationMatrix& b) {
        return a.names_ == b.names_ && a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
               a.values_ == b.values_;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> lookup_;
    Eigen::MatrixXd values_;
    Eigen::VectorXd max_;
};

struct ThresholdConfig {
    double hi_fraction = 0.8;        // P: value >= hi * max
    double lo_fraction = 0.2;        // N: value <= lo * max
    double confirm_fraction = 0.8;   // confirmed: target % >= 100 * confirm
    double activate_fraction = 0.8;  // "activates": value >= activate * max
};

/// Throws Error::Kind::InvalidConfig unless 0 < lo < hi <= 1,
/// 0 < confirm <= 1 and 0 < activate <= 1.
void validate(const ThresholdConfig& t);

/// Positive and negative rows for one neuron. Image ids in the result are row
/// indices of m. Rows strictly between the two bands belong to neither set.
/// Returns nullopt when the neuron never activates (max = 0).
std::optional<ExampleSets> example_sets(const ActivationMatrix& m, std::size_t neuron, const ThresholdConfig& t = {});

struct NeuronLabelRecord {
    std::size_t neuron = 0;
    std::vector<ScoredHypothesis> hypotheses;  // ranked; front() is the target label
    bool skipped = false;                      // neuron max was 0
};

/// One induction run per neuron; matrix rows are matched to KB images by name.
std::vector<NeuronLabelRecord> label_neurons(const ActivationMatrix& m, const KnowledgeBase& kb,
                                             const ThresholdConfig& t = {}, const InductionConfig& cfg = {});

/// Percentage of rows whose activation reaches activate_fraction of the
/// reference maximum (m's own column max when not given).
double activation_rate(const ActivationMatrix& m, std::size_t neuron, std::span<const std::size_t> rows,
                       const ThresholdConfig& t = {}, std::optional<double> reference_max = std::nullopt);

/// Label string attached to a neuron, from induction or an external method.
struct NeuronLabel {
    std::size_t neuron = 0;
    std::string label;

    friend bool operator==(const NeuronLabel&, const NeuronLabel&) = default;
};

/// Top-ranked label of every non-skipped record.
std::vector<NeuronLabel> target_labels(std::span<const NeuronLabelRecord> records, const ClassHierarchy& h);

/// Comma-separated conjuncts, each normalized, rejoined with ", ".
std::string canonical_label(std::string_view label);

/// Distinct labels by canonical form, sorted.
std::vector<std::string> unique_labels(std::span<const NeuronLabel> labels);

/// label -> image names.
using ImageSetManifest = std::map<std::string, std::vector<std::string>>;

struct ConfirmationRecord {
    std::size_t neuron = 0;
    std::string label;
    std::size_t image_count = 0;
    double target_pct = 0.0;
    double non_target_pct = 0.0;  // 0 when no other label has images
    bool confirmed = false;
};

/// Target % over the label's own image set and non-target % over the images of
/// every other manifest label. Activation thresholds use the neuron maximum of
/// the labeling pool; image values are read from `retrieved`.
std::vector<ConfirmationRecord> confirm_labels(const ActivationMatrix& pool, const ActivationMatrix& retrieved,
                                               std::span<const NeuronLabel> labels, const ImageSetManifest& manifest,
                                               const ThresholdConfig& t = {});

struct EvaluationRecord {
    std::size_t neuron = 0;
    std::string label;
    GroupSummary target;
    GroupSummary non_target;
    MwuResult mwu;
};

/// Mann-Whitney comparison of target vs non-target activations per label on
/// the held-out evaluation images.
std::vector<EvaluationRecord> evaluate_labels(const ActivationMatrix& pool, const ActivationMatrix& retrieved,
                                              std::span<const NeuronLabel> labels, const ImageSetManifest& manifest,
                                              const ThresholdConfig& t = {});

}  // namespace conlab
