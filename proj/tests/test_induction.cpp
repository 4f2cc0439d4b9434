#include <memory>
#include <random>

#include "conlab/error.hpp"
#include "conlab/induction.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace conlab;
using testsupport::to_examples;

namespace {

struct Fixture {
    std::vector<ClassHierarchy::NamedEdge> edges;
    std::vector<ImageAnnotation> ann;
    KnowledgeBase kb;

    Fixture(std::vector<ClassHierarchy::NamedEdge> e, std::vector<ImageAnnotation> a)
        : edges(std::move(e)), ann(std::move(a)),
          kb(build_kb(std::make_shared<const ClassHierarchy>(ClassHierarchy::from_edges(edges)), ann)) {}

    const ClassHierarchy& h() const { return kb.hierarchy(); }
};

const std::vector<ClassHierarchy::NamedEdge> kStreet{{"crosswalk", "road_marking"},
                                                     {"stop_line", "road_marking"},
                                                     {"road_marking", "thing"},
                                                     {"car", "vehicle"},
                                                     {"vehicle", "thing"},
                                                     {"tree", "plant"},
                                                     {"plant", "thing"},
                                                     {"dog", "animal"},
                                                     {"animal", "thing"}};

}  // namespace

TEST_CASE("coverage examples") {
    Fixture f({{"door", "entrance"}}, {{"p1", {"door"}}, {"n1", {"door"}}});
    const ClassExpression door(f.h().id("door"));
    auto s = coverage(f.kb, door, to_examples(f.kb, {"p1"}, {}));
    CHECK(s.coverage == 1.0);
    CHECK(s.z1_count == 1);
    CHECK(s.z2_count == 0);
    s = coverage(f.kb, door, to_examples(f.kb, {"p1"}, {"n1"}));
    CHECK(s.coverage == 0.5);
    CHECK(s.z1_count == 1);
    CHECK(s.z2_count == 0);
}

TEST_CASE("example set validation") {
    Fixture f({{"door", "entrance"}}, {{"p1", {"door"}}, {"n1", {"door"}}});
    CHECK_THROWS_AS(coverage(f.kb, ClassExpression(f.h().id("door")), {}), Error);
    CHECK_THROWS_AS(induce(f.kb, to_examples(f.kb, {"p1"}, {"p1"})), Error);
    InductionConfig bad;
    bad.beam_width = 0;
    CHECK_THROWS_AS(induce(f.kb, to_examples(f.kb, {"p1"}, {"n1"}), bad), Error);
}

TEST_CASE("candidate atoms are ancestors of positive assertions") {
    Fixture f({{"dog", "mammal"}, {"mammal", "animal"}, {"cat", "mammal"}}, {{"p", {"dog"}}, {"q", {}}});
    const auto atoms = candidate_atoms(f.kb, to_examples(f.kb, {"p"}, {}));
    CHECK(atoms == std::vector<ClassId>{f.h().id("dog"), f.h().id("mammal"), f.h().id("animal")});
    CHECK(candidate_atoms(f.kb, to_examples(f.kb, {"q"}, {"p"})).empty());
    CHECK(induce(f.kb, to_examples(f.kb, {"q"}, {"p"})).empty());
}

TEST_CASE("candidate atoms equal the brute-force filter") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 40; ++trial) {
        const auto r = testsupport::random_kb(rng, 20, 20, 4);
        Fixture f(r.edges, r.annotations);
        const testsupport::ReachOracle reach(r.edges);
        const auto [pos, neg] = testsupport::random_examples(rng, r.annotations);
        std::vector<ClassId> expected;
        for (std::uint32_t c = 0; c < f.h().class_count(); ++c) {
            const auto ext = testsupport::oracle_extension(reach, r.annotations, {f.h().name(ClassId{c})});
            if (testsupport::oracle_coverage(ext, pos, neg).z1 > 0) expected.push_back(ClassId{c});
        }
        CHECK(candidate_atoms(f.kb, to_examples(f.kb, pos, neg)) == expected);
    }
}

TEST_CASE("planted perfect atom ranks first") {
    Fixture f(kStreet, {{"p1", {"crosswalk", "car"}},
                        {"p2", {"crosswalk", "tree"}},
                        {"p3", {"crosswalk"}},
                        {"n1", {"stop_line", "car"}},
                        {"n2", {"tree", "dog"}},
                        {"n3", {"car"}}});
    const std::vector<std::string> pos{"p1", "p2", "p3"}, neg{"n1", "n2", "n3"};
    const auto hyps = induce(f.kb, to_examples(f.kb, pos, neg));
    REQUIRE_FALSE(hyps.empty());
    CHECK(hyps.front().expression == ClassExpression(f.h().id("crosswalk")));
    CHECK(hyps.front().coverage == 1.0);
    CHECK(hyps.front().expression.render(f.h()) == "crosswalk");
    CHECK(testsupport::coverage_matches(testsupport::ReachOracle(f.edges), f.ann, f.h(), hyps, pos, neg));
}

TEST_CASE("only a conjunction separates") {
    Fixture f({{"footboard", "bed_part"}, {"bed_part", "furniture_part"}, {"chain", "hardware"}, {"lamp", "light"}},
              {{"p1", {"footboard", "chain"}},
               {"p2", {"footboard", "chain", "lamp"}},
               {"p3", {"chain", "footboard"}},
               {"n1", {"footboard"}},
               {"n2", {"chain", "lamp"}},
               {"n3", {"lamp"}}});
    const std::vector<std::string> pos{"p1", "p2", "p3"}, neg{"n1", "n2", "n3"};
    const auto ex = to_examples(f.kb, pos, neg);
    const ClassExpression pair({f.h().id("footboard"), f.h().id("chain")});
    for (auto atom : candidate_atoms(f.kb, ex)) CHECK(coverage(f.kb, ClassExpression(atom), ex).z2_count < neg.size());
    const auto hyps = induce(f.kb, ex);
    REQUIRE_FALSE(hyps.empty());
    CHECK(hyps.front().coverage == 1.0);
    CHECK(hyps.front().expression.size() == 2);
    const auto it = std::find_if(hyps.begin(), hyps.end(), [&](const auto& h) { return h.expression == pair; });
    REQUIRE(it != hyps.end());
    CHECK(it->coverage == 1.0);
    const testsupport::ReachOracle reach(f.edges);
    CHECK(testsupport::exhaustive_best(reach, f.ann, pos, neg) == hyps.front().coverage);
    CHECK(testsupport::coverage_matches(reach, f.ann, f.h(), hyps, pos, neg));

    InductionConfig atoms_only;
    atoms_only.max_conjuncts = 1;
    const auto single = induce(f.kb, ex, atoms_only);
    REQUIRE_FALSE(single.empty());
    CHECK(single.front().expression.size() == 1);
}

TEST_CASE("top-1 equals the exhaustive optimum on random KBs") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 60; ++trial) {
        const auto r = testsupport::random_kb(rng, 30, 40, 8);
        Fixture f(r.edges, r.annotations);
        const testsupport::ReachOracle reach(r.edges);
        const auto [pos, neg] = testsupport::random_examples(rng, r.annotations);
        const auto ex = to_examples(f.kb, pos, neg);
        InductionConfig cfg;
        cfg.beam_width = std::max<std::size_t>(1, f.h().class_count());
        cfg.top_k = 10;
        const auto hyps = induce(f.kb, ex, cfg);
        const double best = testsupport::exhaustive_best(reach, r.annotations, pos, neg);
        if (best < 0.0) {
            CHECK(hyps.empty());
            continue;
        }
        REQUIRE_FALSE(hyps.empty());
        CHECK(hyps.front().coverage == best);
        CHECK(testsupport::coverage_matches(reach, r.annotations, f.h(), hyps, pos, neg));
    }
}

TEST_CASE("ranking order, determinism and conjunct monotonicity") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 40; ++trial) {
        const auto r = testsupport::random_kb(rng, 25, 30, 6);
        Fixture f(r.edges, r.annotations);
        const auto [pos, neg] = testsupport::random_examples(rng, r.annotations);
        const auto ex = to_examples(f.kb, pos, neg);
        InductionConfig cfg;
        cfg.top_k = 15;
        cfg.beam_width = 8;
        const auto hyps = induce(f.kb, ex, cfg);
        CHECK(hyps.size() <= cfg.top_k);
        for (std::size_t i = 1; i < hyps.size(); ++i) CHECK_FALSE(ranks_before(hyps[i], hyps[i - 1], f.h()));
        const auto again = induce(f.kb, ex, cfg);
        REQUIRE(again.size() == hyps.size());
        for (std::size_t i = 0; i < hyps.size(); ++i) CHECK(again[i].expression == hyps[i].expression);
        for (const auto& h : hyps) {
            CHECK(h.z1_count >= 1);
            for (auto c : h.expression.conjuncts()) {
                const auto part = coverage(f.kb, ClassExpression(c), ex);
                CHECK(h.z1_count <= part.z1_count);
                CHECK(h.z2_count >= part.z2_count);
            }
        }
        CHECK(testsupport::coverage_matches(testsupport::ReachOracle(r.edges), r.annotations, f.h(), hyps, pos, neg));
    }
}

TEST_CASE("ties break by positives, size, then name") {
    Fixture f({{"b", "root"}, {"a", "root"}}, {{"p", {"a", "b"}}, {"n", {}}});
    const auto ex = to_examples(f.kb, {"p"}, {"n"});
    InductionConfig cfg;
    cfg.top_k = 5;
    const auto hyps = induce(f.kb, ex, cfg);
    REQUIRE(hyps.size() == 4);
    CHECK(hyps[0].expression.render(f.h()) == "a");
    CHECK(hyps[1].expression.render(f.h()) == "b");
    CHECK(hyps[2].expression.render(f.h()) == "root");
    CHECK(hyps[3].expression.size() == 2);
}
