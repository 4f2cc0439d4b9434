#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conlab/concept_activation.hpp"
#include "conlab/induction.hpp"
#include "conlab/neuron_analysis.hpp"
#include "conlab/statistics.hpp"
#include "conlab/synthetic.hpp"

namespace conlab {

// Every writer emits <stem>.csv (human-readable, rounded as in published
// tables) and <stem>.json (raw doubles). Output depends only on the inputs.

void write_hypotheses_report(const std::filesystem::path& dir, std::span<const ScoredHypothesis> hypotheses,
                             const ClassHierarchy& h);

/// Per-neuron ranked hypotheses (neuron, rank, label, coverage, z1, z2).
void write_label_report(const std::filesystem::path& dir, std::span<const NeuronLabelRecord> records,
                        const ClassHierarchy& h);

/// Neuron, label, images, coverage (blank when unknown), target %, non-target %, confirmed.
void write_confirmation_report(const std::filesystem::path& dir, std::span<const ConfirmationRecord> records,
                               const std::map<std::size_t, double>& coverage = {});

/// Neuron, label, images, activation % / mean / median for target and
/// non-target, z-score, p-value.
void write_evaluation_report(const std::filesystem::path& dir, std::span<const EvaluationRecord> records);

/// Concept, method, train accuracy, test accuracy, k-fold p-value.
void write_concept_report(const std::filesystem::path& dir, std::span<const ConceptResult> results);

/// Test accuracies per method name and classifier kind.
using MethodAccuracies = std::map<std::string, std::map<ClassifierKind, std::vector<double>>>;

/// Pairwise Mann-Whitney comparison ("A x B") and mean/median/std per method.
void write_method_comparison(const std::filesystem::path& dir, const MethodAccuracies& accuracies);

/// method -> (high, medium, low) counts.
void write_bins_report(const std::filesystem::path& dir, const std::string& stem,
                       const std::map<std::string, RelevanceBins>& bins);

void write_recovery_report(const std::filesystem::path& dir, const RecoveryReport& report);

}  // namespace conlab
