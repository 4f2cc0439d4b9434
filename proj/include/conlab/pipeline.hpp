#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conlab/concept_activation.hpp"
#include "conlab/knowledge_base.hpp"
#include "conlab/neuron_analysis.hpp"
#include "conlab/synthetic.hpp"

namespace conlab {

/// Canonical label -> sorted names of KB images satisfying it. Labels that do
/// not parse against the hierarchy or have an empty extension are omitted.
ImageSetManifest retrieve_from_kb(const KnowledgeBase& kb, std::span<const std::string> labels);

struct ManifestSplit {
    ImageSetManifest confirm;
    ImageSetManifest eval;
};

/// Seeded per-label split; the confirm share is round(fraction * n) clamped
/// to [1, n - 1] when n >= 2, and n == 1 goes to confirm.
ManifestSplit split_manifest(const ImageSetManifest& manifest, double confirm_fraction, std::uint64_t seed);

struct PipelineConfig {
    ThresholdConfig thresholds;
    InductionConfig induction;
    ClassifierConfig classifier;
    std::size_t max_edit_distance = 0;
    double confirm_fraction = 0.8;
    std::uint64_t seed = 42;
    bool concept_activation = true;
};

struct MethodOutcome {
    std::string method;
    std::vector<NeuronLabel> labels;
    std::vector<std::string> missing_labels;  // no retrieved images
    std::vector<ConfirmationRecord> confirmation;
    std::vector<EvaluationRecord> evaluation;
    std::vector<ConceptResult> concepts;
    std::vector<std::string> skipped_concepts;  // too few images for k-fold
};

/// Confirm -> evaluate confirmed labels -> concept-activation classifiers.
MethodOutcome analyze_method(const std::string& method, std::vector<NeuronLabel> labels, const ActivationMatrix& pool,
                             const ActivationMatrix& retrieved, const ManifestSplit& manifests,
                             const PipelineConfig& cfg);

struct PipelineInputs {
    std::filesystem::path hierarchy;
    std::filesystem::path annotations;
    std::filesystem::path activations;
    /// When absent, retrieval is simulated from the KB over the pool images.
    std::optional<std::filesystem::path> retrieved_activations;
    std::optional<std::filesystem::path> confirm_manifest;
    std::optional<std::filesystem::path> eval_manifest;
    std::optional<std::filesystem::path> ground_truth;
    std::map<std::string, std::filesystem::path> external_labels;  // method -> labels CSV
};

struct PipelineSummary {
    std::size_t neurons = 0;
    std::size_t labeled = 0;
    std::vector<MethodOutcome> methods;  // induced method first
    std::optional<RecoveryReport> recovery;
};

inline constexpr const char* kInducedMethod = "concept_induction";

/// Runs every stage and writes reports under out_dir (one subdirectory per
/// method plus cross-method comparison and binning tables).
PipelineSummary run_pipeline(const PipelineInputs& inputs, const PipelineConfig& cfg,
                             const std::filesystem::path& out_dir);

}  // namespace conlab
