#include "conlab/induction.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "conlab/error.hpp"

namespace conlab {

void validate(const InductionConfig& cfg) {
    if (cfg.max_conjuncts < 1 || cfg.beam_width < 1 || cfg.top_k < 1)
        throw Error(Error::Kind::InvalidConfig, "induction config: max_conjuncts, beam_width and top_k must be >= 1");
}

void validate(const ExampleSets& ex) {
    if (ex.positives.empty() && ex.negatives.empty())
        throw Error(Error::Kind::InvalidArgument, "example sets are both empty");
    std::unordered_set<ImageId> pos(ex.positives.begin(), ex.positives.end());
    for (auto n : ex.negatives) {
        if (pos.contains(n))
            throw Error(Error::Kind::InvalidArgument,
                        "image " + std::to_string(n.value) + " is both a positive and a negative example");
    }
}

ScoredHypothesis coverage(const KnowledgeBase& kb, const ClassExpression& e, const ExampleSets& ex) {
    validate(ex);
    ScoredHypothesis h{e, 0.0, 0, 0};
    for (auto p : ex.positives) h.z1_count += kb.satisfies(p, e) ? 1 : 0;
    for (auto n : ex.negatives) h.z2_count += kb.satisfies(n, e) ? 0 : 1;
    h.coverage = static_cast<double>(h.z1_count + h.z2_count) /
                 static_cast<double>(ex.positives.size() + ex.negatives.size());
    return h;
}

std::vector<ClassId> candidate_atoms(const KnowledgeBase& kb, const ExampleSets& ex) {
    std::vector<ClassId> out;
    for (auto p : ex.positives) {
        const auto c = kb.closure(p);
        out.insert(out.end(), c.begin(), c.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

bool ranks_before_named(const ScoredHypothesis& a, const std::string& a_name, const ScoredHypothesis& b,
                        const std::string& b_name) {
    if (a.coverage != b.coverage) return a.coverage > b.coverage;
    if (a.z1_count != b.z1_count) return a.z1_count > b.z1_count;
    if (a.expression.size() != b.expression.size()) return a.expression.size() < b.expression.size();
    return a_name < b_name;
}

using Bits = std::vector<std::uint64_t>;

std::size_t popcount(const Bits& bits) {
    std::size_t n = 0;
    for (auto w : bits) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

Bits bit_and(const Bits& a, const Bits& b) {
    Bits out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] & b[i];
    return out;
}

struct Node {
    std::vector<std::size_t> beam_slots;  // indices into the atom beam; empty for plain atoms
    ScoredHypothesis hyp;
    std::string name;
    Bits pos;  // positives entailed
    Bits neg;  // negatives entailed
};

void rank(std::vector<Node>& nodes) {
    std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) {
        return ranks_before_named(a.hyp, a.name, b.hyp, b.name);
    });
}

}  // namespace

bool ranks_before(const ScoredHypothesis& a, const ScoredHypothesis& b, const ClassHierarchy& h) {
    return ranks_before_named(a, a.expression.render(h), b, b.expression.render(h));
}

std::vector<ScoredHypothesis> induce(const KnowledgeBase& kb, const ExampleSets& ex, const InductionConfig& cfg) {
    validate(cfg);
    validate(ex);
    const auto& h = kb.hierarchy();
    const auto atoms = candidate_atoms(kb, ex);
    if (atoms.empty()) return {};

    const std::size_t n_pos = ex.positives.size();
    const std::size_t n_neg = ex.negatives.size();
    const double total = static_cast<double>(n_pos + n_neg);

    std::unordered_map<ClassId, std::size_t> slot;
    slot.reserve(atoms.size() * 2);
    std::vector<Node> level(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        slot.emplace(atoms[i], i);
        level[i].hyp.expression = ClassExpression(atoms[i]);
        level[i].name = h.name(atoms[i]);
        level[i].pos.assign((n_pos + 63) / 64, 0);
        level[i].neg.assign((n_neg + 63) / 64, 0);
    }
    auto mark = [&](std::span<const ImageId> images, Bits Node::*field) {
        for (std::size_t k = 0; k < images.size(); ++k) {
            for (auto c : kb.closure(images[k])) {
                if (auto it = slot.find(c); it != slot.end())
                    (level[it->second].*field)[k / 64] |= std::uint64_t{1} << (k % 64);
            }
        }
    };
    mark(ex.positives, &Node::pos);
    mark(ex.negatives, &Node::neg);

    auto score = [&](Node& node) {
        node.hyp.z1_count = popcount(node.pos);
        node.hyp.z2_count = n_neg - popcount(node.neg);
        node.hyp.coverage = static_cast<double>(node.hyp.z1_count + node.hyp.z2_count) / total;
    };
    for (auto& node : level) score(node);
    rank(level);

    const std::size_t beam_size = std::min(cfg.beam_width, level.size());
    std::vector<ClassId> beam(beam_size);
    for (std::size_t i = 0; i < beam_size; ++i) {
        beam[i] = level[i].hyp.expression.conjuncts().front();
        level[i].beam_slots = {i};
    }
    const std::vector<Node> beam_atoms(level.begin(), level.begin() + static_cast<std::ptrdiff_t>(beam_size));

    std::vector<ScoredHypothesis> results;
    results.reserve(level.size());
    std::vector<std::string> result_names;
    for (auto& node : level) {
        results.push_back(node.hyp);
        result_names.push_back(node.name);
    }

    std::vector<Node> frontier = beam_atoms;
    for (std::size_t width = 2; width <= cfg.max_conjuncts && !frontier.empty(); ++width) {
        std::vector<Node> next;
        for (const auto& base : frontier) {
            for (std::size_t j = base.beam_slots.back() + 1; j < beam_size; ++j) {
                const bool redundant = std::any_of(base.beam_slots.begin(), base.beam_slots.end(), [&](std::size_t s) {
                    return h.is_subclass_of(beam[s], beam[j]) || h.is_subclass_of(beam[j], beam[s]);
                });
                if (redundant) continue;
                Node node;
                node.pos = bit_and(base.pos, beam_atoms[j].pos);
                node.hyp.z1_count = popcount(node.pos);
                if (node.hyp.z1_count == 0) continue;
                node.neg = bit_and(base.neg, beam_atoms[j].neg);
                node.beam_slots = base.beam_slots;
                node.beam_slots.push_back(j);
                std::vector<ClassId> conj;
                for (auto s : node.beam_slots) conj.push_back(beam[s]);
                node.hyp.expression = ClassExpression(std::move(conj));
                node.name = node.hyp.expression.render(h);
                score(node);
                next.push_back(std::move(node));
            }
        }
        rank(next);
        for (const auto& node : next) {
            results.push_back(node.hyp);
            result_names.push_back(node.name);
        }
        if (next.size() > cfg.beam_width) next.resize(cfg.beam_width);
        frontier = std::move(next);
    }

    std::vector<std::size_t> order(results.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t keep = std::min(cfg.top_k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return ranks_before_named(results[a], result_names[a], results[b], result_names[b]);
                      });
    std::vector<ScoredHypothesis> top;
    top.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) top.push_back(results[order[i]]);
    return top;
}

}  // namespace conlab
