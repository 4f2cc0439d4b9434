#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "conlab/hierarchy.hpp"
#include "conlab/knowledge_base.hpp"
#include "conlab/neuron_analysis.hpp"

namespace conlab {

/// Parameters of the planted-concept generator.
struct SyntheticConfig {
    std::size_t class_count = 500;
    std::size_t depth = 6;          // levels below the root
    std::size_t images = 1000;
    std::size_t neurons = 64;
    /// neuron -> class id of the generated hierarchy. When empty,
    /// planted_count neurons are planted on seeded choices of distinct
    /// classes one level above the leaves; the other neurons stay silent.
    std::map<std::size_t, std::uint32_t> planted_map;
    std::size_t planted_count = 50;
    double signal = 4.0;
    double noise_sigma = 0.2;
    /// Each image draws Binomial(3, rate) extra tags uniformly over all classes.
    double distractor_tag_rate = 0.3;
    double extra_parent_rate = 0.1;  // chance of a second parent per class
    std::uint64_t rng_seed = 7;
};

struct SyntheticBundle {
    std::vector<ClassHierarchy::NamedEdge> edges;  // hierarchy in generation order
    std::shared_ptr<const ClassHierarchy> hierarchy;
    std::vector<ImageAnnotation> annotations;
    ActivationMatrix activations;
    std::map<std::size_t, ClassId> ground_truth;  // planted neuron -> class
};

/// Seeded random DAG: a root plus `depth` levels of geometrically growing
/// width; each class has a parent one level up and, with probability
/// extra_parent_rate, a second parent at any shallower level. Class i is
/// named "concept_<i>" zero-padded to a common width.
std::vector<ClassHierarchy::NamedEdge> generate_hierarchy_edges(std::size_t class_count, std::size_t depth,
                                                                double extra_parent_rate, std::uint64_t seed);

/// Throws Error::Kind::InvalidConfig on inconsistent parameters (e.g. a
/// planted class outside the hierarchy, too few images per planted class).
SyntheticBundle generate(const SyntheticConfig& cfg);

/// Writes hierarchy.tsv, annotations.json, activations.csv and
/// ground_truth.json into dir.
void write_bundle(const SyntheticBundle& bundle, const std::filesystem::path& dir);

struct RecoveryEntry {
    std::size_t neuron = 0;
    std::string planted;
    std::string induced;  // empty when the neuron got no label
    bool recovered = false;
};

struct RecoveryReport {
    std::vector<RecoveryEntry> entries;
    std::size_t planted = 0;
    std::size_t recovered = 0;
    double rate = 0.0;
};

/// A neuron counts as recovered when its top-1 label is a single class equal
/// to the planted class or one of its ancestors.
RecoveryReport recovery(std::span<const NeuronLabelRecord> records, const std::map<std::size_t, ClassId>& ground_truth,
                        const ClassHierarchy& h);

}  // namespace conlab
