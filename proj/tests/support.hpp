// Test-side oracles and generators. Nothing here calls the library's closure
// index, coverage or ranking code; the oracles work from raw edge lists.
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "conlab/hierarchy.hpp"
#include "conlab/induction.hpp"
#include "conlab/knowledge_base.hpp"

namespace testsupport {

using Edge = std::pair<std::string, std::string>;  // child, parent

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::path(CONLAB_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string node_name(std::size_t i) { return "c" + std::to_string(i); }

/// Random DAG over n nodes: edges only point from a higher index to a lower
/// one, so the graph is acyclic by construction. Edge order is shuffled.
inline std::vector<Edge> random_dag(std::mt19937_64& rng, std::size_t n, double edge_prob) {
    std::vector<Edge> edges;
    std::bernoulli_distribution keep(edge_prob);
    for (std::size_t child = 1; child < n; ++child) {
        for (std::size_t parent = 0; parent < child; ++parent) {
            if (keep(rng)) edges.emplace_back(node_name(child), node_name(parent));
        }
    }
    // keep every node present
    for (std::size_t i = 1; i < n; ++i) {
        const bool seen = std::any_of(edges.begin(), edges.end(),
                                      [&](const Edge& e) { return e.first == node_name(i) || e.second == node_name(i); });
        if (!seen) edges.emplace_back(node_name(i), node_name(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)));
    }
    if (n == 1) edges.emplace_back(node_name(0), node_name(0) + "_root");
    std::shuffle(edges.begin(), edges.end(), rng);
    return edges;
}

/// Reflexive-transitive "sub reaches sup" by explicit DFS over parent lists.
class ReachOracle {
public:
    explicit ReachOracle(const std::vector<Edge>& edges) {
        for (const auto& [child, parent] : edges) {
            parents_[child].insert(parent);
            parents_.try_emplace(parent);
        }
    }

    std::set<std::string> names() const {
        std::set<std::string> out;
        for (const auto& [n, p] : parents_) out.insert(n);
        return out;
    }

    std::set<std::string> up(const std::string& start) const {
        std::set<std::string> seen{start};
        std::vector<std::string> stack{start};
        while (!stack.empty()) {
            const auto cur = stack.back();
            stack.pop_back();
            const auto it = parents_.find(cur);
            if (it == parents_.end()) continue;
            for (const auto& p : it->second) {
                if (seen.insert(p).second) stack.push_back(p);
            }
        }
        return seen;
    }

    bool reaches(const std::string& sub, const std::string& sup) const { return up(sub).contains(sup); }

private:
    std::map<std::string, std::set<std::string>> parents_;
};

/// Small annotated corpus over a random DAG.
struct RandomKb {
    std::vector<Edge> edges;
    std::vector<conlab::ImageAnnotation> annotations;  // tags are exact class names
};

inline RandomKb random_kb(std::mt19937_64& rng, std::size_t max_classes, std::size_t max_images, std::size_t max_tags) {
    RandomKb kb;
    const std::size_t classes = std::uniform_int_distribution<std::size_t>(3, max_classes)(rng);
    kb.edges = random_dag(rng, classes, 2.5 / static_cast<double>(classes));
    const std::size_t images = std::uniform_int_distribution<std::size_t>(2, max_images)(rng);
    std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
    std::uniform_int_distribution<std::size_t> tag_count(0, max_tags);
    for (std::size_t i = 0; i < images; ++i) {
        std::vector<std::string> tags;
        const auto k = tag_count(rng);
        for (std::size_t t = 0; t < k; ++t) tags.push_back(node_name(pick(rng)));
        kb.annotations.emplace_back("img" + std::to_string(i), std::move(tags));
    }
    return kb;
}

/// Images whose tags reach every conjunct, by enumeration.
inline std::set<std::string> oracle_extension(const ReachOracle& reach, const std::vector<conlab::ImageAnnotation>& ann,
                                              const std::vector<std::string>& conjuncts) {
    std::set<std::string> out;
    for (const auto& [image, tags] : ann) {
        std::set<std::string> closure;
        for (const auto& t : tags) {
            const auto u = reach.up(t);
            closure.insert(u.begin(), u.end());
        }
        const bool all = std::all_of(conjuncts.begin(), conjuncts.end(),
                                     [&](const std::string& c) { return closure.contains(c); });
        if (all) out.insert(image);
    }
    return out;
}

struct OracleScore {
    double coverage = 0.0;
    std::size_t z1 = 0;
    std::size_t z2 = 0;
};

/// (|Z1| + |Z2|) / |P u N| from an explicit extension.
inline OracleScore oracle_coverage(const std::set<std::string>& extension, const std::vector<std::string>& positives,
                                   const std::vector<std::string>& negatives) {
    OracleScore s;
    for (const auto& p : positives) s.z1 += extension.contains(p) ? 1 : 0;
    for (const auto& n : negatives) s.z2 += extension.contains(n) ? 0 : 1;
    s.coverage = static_cast<double>(s.z1 + s.z2) / static_cast<double>(positives.size() + negatives.size());
    return s;
}

/// Best coverage over all atoms and unordered atom pairs whose extension
/// contains at least one positive.
inline double exhaustive_best(const ReachOracle& reach, const std::vector<conlab::ImageAnnotation>& ann,
                              const std::vector<std::string>& positives, const std::vector<std::string>& negatives) {
    const auto all = reach.names();
    const std::vector<std::string> names(all.begin(), all.end());
    std::map<std::string, std::set<std::string>> ext;
    for (const auto& n : names) ext[n] = oracle_extension(reach, ann, {n});
    double best = -1.0;
    auto consider = [&](const std::set<std::string>& e) {
        const auto s = oracle_coverage(e, positives, negatives);
        if (s.z1 >= 1) best = std::max(best, s.coverage);
    };
    for (std::size_t a = 0; a < names.size(); ++a) {
        consider(ext[names[a]]);
        for (std::size_t b = a + 1; b < names.size(); ++b) {
            std::set<std::string> both;
            std::set_intersection(ext[names[a]].begin(), ext[names[a]].end(), ext[names[b]].begin(),
                                  ext[names[b]].end(), std::inserter(both, both.end()));
            consider(both);
        }
    }
    return best;
}

/// Splits the images of a random corpus into disjoint, seeded P and N.
inline std::pair<std::vector<std::string>, std::vector<std::string>> random_examples(
    std::mt19937_64& rng, const std::vector<conlab::ImageAnnotation>& ann) {
    std::vector<std::string> pos;
    std::vector<std::string> neg;
    std::uniform_int_distribution<int> role(0, 2);
    for (const auto& [image, tags] : ann) {
        const int r = role(rng);
        if (r == 0) pos.push_back(image);
        if (r == 1) neg.push_back(image);
    }
    if (pos.empty()) pos.push_back(ann.front().first);
    std::erase(neg, pos.front());
    return {pos, neg};
}

/// Names of the conjuncts of an expression.
inline std::vector<std::string> conjunct_names(const conlab::ClassExpression& e, const conlab::ClassHierarchy& h) {
    std::vector<std::string> out;
    for (auto c : e.conjuncts()) out.push_back(h.name(c));
    return out;
}

/// Every hypothesis's coverage, z1 and z2 equal the enumeration oracle exactly.
inline bool coverage_matches(const ReachOracle& reach, const std::vector<conlab::ImageAnnotation>& ann,
                             const conlab::ClassHierarchy& h, const std::vector<conlab::ScoredHypothesis>& hyps,
                             const std::vector<std::string>& positives, const std::vector<std::string>& negatives) {
    for (const auto& hyp : hyps) {
        const auto ext = oracle_extension(reach, ann, conjunct_names(hyp.expression, h));
        const auto s = oracle_coverage(ext, positives, negatives);
        if (s.coverage != hyp.coverage || s.z1 != hyp.z1_count || s.z2 != hyp.z2_count) return false;
    }
    return true;
}

inline conlab::ExampleSets to_examples(const conlab::KnowledgeBase& kb, const std::vector<std::string>& positives,
                                       const std::vector<std::string>& negatives) {
    conlab::ExampleSets ex;
    for (const auto& p : positives) ex.positives.push_back(kb.image(p));
    for (const auto& n : negatives) ex.negatives.push_back(kb.image(n));
    return ex;
}

}  // namespace testsupport
