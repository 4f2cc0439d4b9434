#pragma once

#include <cstddef>
#include <vector>

#include "conlab/ids.hpp"
#include "conlab/knowledge_base.hpp"

namespace conlab {

/// Positive (P) and negative (N) example images for one induction run.
struct ExampleSets {
    std::vector<ImageId> positives;
    std::vector<ImageId> negatives;
};

/// A class expression with its coverage tallies.
/// coverage = (z1_count + z2_count) / (|P| + |N|).
struct ScoredHypothesis {
    ClassExpression expression;
    double coverage = 0.0;
    std::size_t z1_count = 0;  // positives entailed
    std::size_t z2_count = 0;  // negatives not entailed
};

struct InductionConfig {
    std::size_t max_conjuncts = 2;
    std::size_t beam_width = 50;
    std::size_t top_k = 3;
};

/// Throws Error::Kind::InvalidConfig unless every field is at least 1.
void validate(const InductionConfig& cfg);

/// Throws Error::Kind::InvalidArgument if P and N overlap or are both empty.
void validate(const ExampleSets& ex);

ScoredHypothesis coverage(const KnowledgeBase& kb, const ClassExpression& e, const ExampleSets& ex);

/// Atoms entailed by at least one positive: the union of ancestors of all
/// classes asserted on P, sorted by id.
std::vector<ClassId> candidate_atoms(const KnowledgeBase& kb, const ExampleSets& ex);

/// Strict-weak ranking order: coverage desc, z1 desc, fewer conjuncts, then
/// rendered name ascending.
bool ranks_before(const ScoredHypothesis& a, const ScoredHypothesis& b, const ClassHierarchy& h);

/// Coverage-maximizing beam search over atoms and conjunctions.
///
/// Every candidate atom is scored; the beam_width best atoms seed level-wise
/// expansion, where each of the beam_width best expressions of the previous
/// level is extended by every later beam atom, up to max_conjuncts. Conjuncts
/// related by subsumption are skipped (the conjunction equals the narrower
/// atom), as are expressions entailed by no positive. Returns at most top_k
/// hypotheses in ranking order.
std::vector<ScoredHypothesis> induce(const KnowledgeBase& kb, const ExampleSets& ex, const InductionConfig& cfg = {});

}  // namespace conlab
