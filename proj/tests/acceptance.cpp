// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "concept_fixtures.hpp"
#include "conlab/cli.hpp"
#include "conlab/concept_activation.hpp"
#include "conlab/induction.hpp"
#include "conlab/io.hpp"
#include "conlab/neuron_analysis.hpp"
#include "conlab/pipeline.hpp"
#include "conlab/statistics.hpp"
#include "conlab/synthetic.hpp"
#include "conlab/tag_mapping.hpp"
#include "support.hpp"

using namespace conlab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned limits.
constexpr int kOracleKbs = 100;
constexpr double kOracleSeconds = 30.0;
constexpr int kMwuPairs = 50;
constexpr double kMwuPTolerance = 0.03;
constexpr double kAntisymmetry = 1e-12;
constexpr double kRecoveryRate = 0.90;
constexpr double kConfirmRate = 0.80;
constexpr double kMwuAlpha = 0.05;
constexpr double kMwuRejectRate = 0.95;
constexpr double kPipelineSeconds = 60.0;
constexpr double kSeparableAccuracy = 0.95;
constexpr double kXorKernelAccuracy = 0.95;
constexpr double kXorLinearAccuracy = 0.75;
constexpr int kShuffleTrials = 20;
constexpr int kShuffleCalm = 18;  // 90 % of 20
constexpr std::size_t kPermutations = 1000;
constexpr std::size_t kScaleClasses = 2'000'000;
constexpr double kParseSeconds = 60.0;
constexpr double kParseGigabytes = 4.0;
constexpr std::size_t kQueries = 10'000'000;
constexpr double kQueryMicros = 10.0;
constexpr std::size_t kScaleImages = 1370;
constexpr double kLabelSeconds = 300.0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int decimals = 2) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(decimals);
    s << v;
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::path(CONLAB_TEST_TMP) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Every hypothesis checked against the enumeration oracle, across criteria.
struct CoverageLedger {
    std::size_t checked = 0;
    std::size_t mismatched = 0;
};
CoverageLedger g_coverage;

// ---- 1 and 2: induction against exhaustive search -----------------------

Outcome induction_oracle() {
    std::mt19937_64 rng(20240101);
    std::size_t matched = 0;
    const auto t0 = Clock::now();
    for (int trial = 0; trial < kOracleKbs; ++trial) {
        const auto rk = testsupport::random_kb(rng, 30, 40, 8);
        const auto h = std::make_shared<const ClassHierarchy>(ClassHierarchy::from_edges(rk.edges));
        const auto kb = build_kb(h, rk.annotations);
        const auto [pos, neg] = testsupport::random_examples(rng, rk.annotations);
        const testsupport::ReachOracle reach(rk.edges);

        InductionConfig cfg;
        cfg.beam_width = h->class_count();
        cfg.top_k = h->class_count() * h->class_count();
        const auto hyps = induce(kb, testsupport::to_examples(kb, pos, neg), cfg);
        const double best = testsupport::exhaustive_best(reach, rk.annotations, pos, neg);
        const bool same = hyps.empty() ? best < 0.0 : hyps.front().coverage == best;
        matched += same ? 1 : 0;

        g_coverage.checked += hyps.size();
        if (!testsupport::coverage_matches(reach, rk.annotations, *h, hyps, pos, neg)) ++g_coverage.mismatched;
    }
    const double secs = seconds_since(t0);
    return {matched == kOracleKbs && secs < kOracleSeconds,
            std::to_string(matched) + "/" + std::to_string(kOracleKbs) + " random KBs match exhaustive top-1 coverage in " +
                fmt(secs) + " s (limit " + fmt(kOracleSeconds, 0) + " s)"};
}

// Oracle coverage for every hypothesis of every labeled neuron of a bundle.
void check_bundle_coverage(const SyntheticBundle& b) {
    const auto kb = build_kb(b.hierarchy, b.annotations);
    const auto records = label_neurons(b.activations, kb);
    const testsupport::ReachOracle reach(std::vector<testsupport::Edge>(b.edges.begin(), b.edges.end()));
    std::vector<std::set<std::string>> closure(b.annotations.size());
    for (std::size_t i = 0; i < b.annotations.size(); ++i) {
        for (const auto& tag : b.annotations[i].second) {
            const auto up = reach.up(normalize_tag(tag));
            closure[i].insert(up.begin(), up.end());
        }
    }
    for (const auto& rec : records) {
        if (rec.skipped) continue;
        const auto ex = example_sets(b.activations, rec.neuron, ThresholdConfig{});
        for (const auto& hyp : rec.hypotheses) {
            const auto names = testsupport::conjunct_names(hyp.expression, *b.hierarchy);
            auto entails = [&](ImageId row) {
                return std::all_of(names.begin(), names.end(),
                                   [&](const std::string& n) { return closure[row.value].contains(n); });
            };
            std::size_t z1 = 0, z2 = 0;
            for (auto p : ex->positives) z1 += entails(p) ? 1 : 0;
            for (auto n : ex->negatives) z2 += entails(n) ? 0 : 1;
            const double cov = static_cast<double>(z1 + z2) /
                               static_cast<double>(ex->positives.size() + ex->negatives.size());
            ++g_coverage.checked;
            if (cov != hyp.coverage || z1 != hyp.z1_count || z2 != hyp.z2_count) ++g_coverage.mismatched;
        }
    }
}

Outcome coverage_formula() {
    return {g_coverage.mismatched == 0 && g_coverage.checked > 0,
            std::to_string(g_coverage.checked - g_coverage.mismatched) + "/" + std::to_string(g_coverage.checked) +
                " emitted hypotheses equal the enumeration oracle exactly"};
}

// ---- 3: Mann-Whitney ------------------------------------------------------

double pair_count_u(const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0.0;
    for (double a : x)
        for (double b : y) u += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    return u;
}

double permutation_p(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> pool(x);
    pool.insert(pool.end(), y.begin(), y.end());
    const double observed = pair_count_u(x, y);
    std::size_t total = 0, extreme = 0;
    for (std::uint32_t mask = 0; mask < (1u << pool.size()); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != x.size()) continue;
        std::vector<double> a, b;
        for (std::size_t i = 0; i < pool.size(); ++i) ((mask >> i) & 1u ? a : b).push_back(pool[i]);
        ++total;
        extreme += pair_count_u(a, b) >= observed ? 1 : 0;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
}

Outcome mann_whitney() {
    std::mt19937_64 rng(777);
    std::uniform_int_distribution<std::size_t> size(1, 8);
    std::uniform_real_distribution<double> shift(-1.5, 1.5);
    std::size_t u_ok = 0, anti_ok = 0, p_checked = 0, p_ok = 0;
    double worst = 0.0;
    for (int trial = 0; trial < kMwuPairs; ++trial) {
        // the last ten pairs are forced to min size 5 so the p check always runs
        const std::size_t n1 = trial < kMwuPairs - 10 ? size(rng) : 5 + size(rng) % 4;
        const std::size_t n2 = trial < kMwuPairs - 10 ? size(rng) : 5 + size(rng) % 4;
        std::normal_distribution<double> dx(shift(rng), 1.0), dy(0.0, 1.0);
        std::vector<double> x(n1), y(n2);
        for (auto& v : x) v = std::round(dx(rng) * 4.0) / 4.0;
        for (auto& v : y) v = std::round(dy(rng) * 4.0) / 4.0;
        const auto r = mann_whitney_u(x, y);
        const auto s = mann_whitney_u(y, x);
        u_ok += r.u_statistic == pair_count_u(x, y) ? 1 : 0;
        anti_ok += std::abs(r.z_score + s.z_score) <= kAntisymmetry ? 1 : 0;
        if (std::min(n1, n2) >= 5) {
            ++p_checked;
            const double gap = std::abs(r.p_one_sided - permutation_p(x, y));
            worst = std::max(worst, gap);
            p_ok += gap <= kMwuPTolerance ? 1 : 0;
        }
    }
    const bool pass = u_ok == kMwuPairs && anti_ok == kMwuPairs && p_ok == p_checked && p_checked > 0;
    return {pass, "U exact " + std::to_string(u_ok) + "/" + std::to_string(kMwuPairs) + ", antisymmetric " +
                      std::to_string(anti_ok) + "/" + std::to_string(kMwuPairs) + ", normal p within " +
                      fmt(kMwuPTolerance) + " of exact " + std::to_string(p_ok) + "/" + std::to_string(p_checked) +
                      " (worst " + fmt(worst, 4) + ")"};
}

// ---- 4: synthetic end-to-end ----------------------------------------------

Outcome synthetic_recovery() {
    const auto dir = scratch("recovery");
    SyntheticConfig sc;  // 500 classes, 1000 images, 64 neurons, signal 4
    sc.noise_sigma = 0.05 * sc.signal;
    sc.distractor_tag_rate = 0.3;
    const auto bundle = generate(sc);
    write_bundle(bundle, dir / "bundle");
    check_bundle_coverage(bundle);

    PipelineInputs in;
    in.hierarchy = dir / "bundle" / "hierarchy.tsv";
    in.annotations = dir / "bundle" / "annotations.json";
    in.activations = dir / "bundle" / "activations.csv";
    in.ground_truth = dir / "bundle" / "ground_truth.json";
    const auto t0 = Clock::now();
    const auto summary = run_pipeline(in, PipelineConfig{}, dir / "out");
    const double secs = seconds_since(t0);

    const auto& induced = summary.methods.front();
    const double planted = static_cast<double>(bundle.ground_truth.size());
    std::size_t confirmed = 0;
    for (const auto& r : induced.confirmation) confirmed += r.confirmed && bundle.ground_truth.contains(r.neuron) ? 1 : 0;
    std::size_t confirmed_all = 0, rejected = 0;
    for (const auto& r : induced.confirmation) confirmed_all += r.confirmed ? 1 : 0;
    for (const auto& e : induced.evaluation) rejected += e.mwu.p_one_sided < kMwuAlpha ? 1 : 0;

    const double recovery = summary.recovery ? summary.recovery->rate : 0.0;
    const double confirm_rate = static_cast<double>(confirmed) / planted;
    const double reject_rate =
        confirmed_all ? static_cast<double>(rejected) / static_cast<double>(confirmed_all) : 0.0;
    const bool pass = recovery >= kRecoveryRate && confirm_rate >= kConfirmRate && reject_rate >= kMwuRejectRate &&
                      secs < kPipelineSeconds;
    return {pass, "recovered " + fmt(100 * recovery, 1) + "% (>= " + fmt(100 * kRecoveryRate, 0) + "), confirmed " +
                      fmt(100 * confirm_rate, 1) + "% (>= " + fmt(100 * kConfirmRate, 0) + "), MWU p < " +
                      fmt(kMwuAlpha) + " for " + std::to_string(rejected) + "/" + std::to_string(confirmed_all) +
                      " confirmed (>= " + fmt(100 * kMwuRejectRate, 0) + "%), pipeline " + fmt(secs, 1) +
                      " s (< " + fmt(kPipelineSeconds, 0) + " s)"};
}

// ---- 5: relevance bins ----------------------------------------------------

Outcome relevance_bins() {
    const std::vector<double> target_pct{80.95, 91.49, 100,   100,   100, 91.43, 89.29, 97.44, 100,   85.19,
                                         91.30, 80.65, 97.50, 100,   84.38, 100, 100,   92.45, 97.06, 88.89};
    const auto b = bin_relevance(target_pct);
    return {b == RelevanceBins{14, 6, 0}, "bins (" + std::to_string(b.high) + ", " + std::to_string(b.medium) + ", " +
                                             std::to_string(b.low) + "), expected (14, 6, 0)"};
}

// ---- 6: concept classifiers ------------------------------------------------

Outcome concept_classifiers() {
    ClassifierConfig cfg;
    std::ostringstream detail;
    bool pass = true;

    std::mt19937_64 rng(606);
    const auto sep = testsupport::clouds(rng, 60, 64, 1.0);
    const auto [sep_train, sep_test] = split_dataset(sep, cfg);
    const double cav_sep = evaluate(train_linear(sep_train, cfg), sep_test);
    const double car_sep = evaluate(train_kernel(sep_train, cfg), sep_test);
    pass &= cav_sep >= kSeparableAccuracy && car_sep >= kSeparableAccuracy;
    detail << "separable CAV " << fmt(cav_sep) << " CAR " << fmt(car_sep);

    const auto xr = testsupport::xor_set(rng, 50);
    const auto [xor_train, xor_test] = split_dataset(xr, cfg);
    const double cav_xor = evaluate(train_linear(xor_train, cfg), xor_test);
    const double car_xor = evaluate(train_kernel(xor_train, cfg), xor_test);
    pass &= car_xor >= kXorKernelAccuracy && cav_xor <= kXorLinearAccuracy;
    detail << "; XOR CAR " << fmt(car_xor) << " CAV " << fmt(cav_xor);

    cfg.permutations = kPermutations;
    for (auto kind : {ClassifierKind::Linear, ClassifierKind::Kernel}) {
        int calm = 0;
        for (int trial = 0; trial < kShuffleTrials; ++trial) {
            std::mt19937_64 trial_rng(static_cast<std::uint64_t>(5000 + trial));
            const auto ds = testsupport::random_labels(trial_rng, 40, 8);
            cfg.rng_seed = static_cast<std::uint64_t>(trial);
            calm += kfold_pvalue(ds, kind, cfg) >= 0.05 ? 1 : 0;
        }
        std::mt19937_64 plant_rng(6060);
        const auto planted = testsupport::clouds(plant_rng, 20, 8, 3.0);
        cfg.rng_seed = 42;
        const double p = kfold_pvalue(planted, kind, cfg);
        pass &= calm >= kShuffleCalm && p == 1.0 / 1001.0;
        detail << "; " << method_name(kind) << " shuffled p >= 0.05 in " << calm << "/" << kShuffleTrials
               << ", planted p = " << fmt(p, 6);
    }
    return {pass, detail.str()};
}

// ---- 7: scale ---------------------------------------------------------------

double peak_rss_gb() {
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return static_cast<double>(ru.ru_maxrss) / (1024.0 * 1024.0);  // ru_maxrss is in KiB
}

// Child mode: parse + build only, in a fresh process so its peak memory is its own.
int parse_only(const char* path) {
    const auto t0 = Clock::now();
    const auto h = read_hierarchy_file(path);
    const double secs = seconds_since(t0);
    std::printf("%zu %.6f %.6f\n", h.class_count(), secs, peak_rss_gb());
    return 0;
}

Outcome scale(const std::string& self) {
    const auto dir = scratch("scale");
    SyntheticConfig sc;
    sc.class_count = kScaleClasses;
    sc.images = kScaleImages;
    sc.noise_sigma = 0.05 * sc.signal;
    auto bundle = generate(sc);
    const auto tsv = dir / "hierarchy.tsv";
    write_text_file(tsv, [&](std::ostream& out) {
        for (const auto& [child, parent] : bundle.edges) out << child << '\t' << parent << '\n';
    });
    bundle.edges.clear();
    bundle.edges.shrink_to_fit();

    std::size_t parsed = 0;
    double parse_secs = 1e9, parse_gb = 1e9;
    const std::string cmd = "\"" + self + "\" --parse-only \"" + tsv.string() + "\"";
    if (FILE* pipe = popen(cmd.c_str(), "r")) {
        if (std::fscanf(pipe, "%zu %lf %lf", &parsed, &parse_secs, &parse_gb) != 3) parsed = 0;
        pclose(pipe);
    }

    const auto& h = *bundle.hierarchy;
    std::mt19937_64 rng(7007);
    std::uniform_int_distribution<std::uint32_t> any(0, static_cast<std::uint32_t>(h.class_count() - 1));
    std::vector<std::pair<ClassId, ClassId>> queries(kQueries);
    for (std::size_t q = 0; q < kQueries; ++q) {
        const ClassId sub{any(rng)};
        ClassId sup{any(rng)};
        if (q % 2 == 0) {  // half the queries walk up from sub, so half are true
            sup = sub;
            for (int steps = static_cast<int>(rng() % 6); steps > 0; --steps) {
                const auto ps = h.parents(sup);
                if (ps.empty()) break;
                sup = ps[rng() % ps.size()];
            }
        }
        queries[q] = {sub, sup};
    }
    std::size_t hits = 0;
    const auto tq = Clock::now();
    for (const auto& [sub, sup] : queries) hits += h.is_subclass_of(sub, sup) ? 1 : 0;
    const double query_us = seconds_since(tq) * 1e6 / static_cast<double>(kQueries);

    const auto tl = Clock::now();
    const auto kb = build_kb(bundle.hierarchy, bundle.annotations);
    const auto records = label_neurons(bundle.activations, kb);
    const double label_secs = seconds_since(tl);
    std::size_t labeled = 0;
    for (const auto& r : records) labeled += r.skipped ? 0 : 1;

    const bool pass = parsed == kScaleClasses && parse_secs <= kParseSeconds && parse_gb <= kParseGigabytes &&
                      query_us <= kQueryMicros && label_secs <= kLabelSeconds && labeled > 0;
    return {pass, std::to_string(parsed) + " classes parsed + indexed in " + fmt(parse_secs, 1) + " s (<= " +
                      fmt(kParseSeconds, 0) + ") at " + fmt(parse_gb) + " GB peak (<= " + fmt(kParseGigabytes, 0) +
                      "); " + std::to_string(kQueries) + " queries at " + fmt(query_us, 3) + " us each (<= " +
                      fmt(kQueryMicros, 0) + ", " + std::to_string(hits) + " true); labeling " +
                      std::to_string(records.size()) + " neurons (" + std::to_string(labeled) + " active) over " +
                      std::to_string(kScaleImages) + " images in " +
                      fmt(label_secs, 1) + " s (<= " + fmt(kLabelSeconds, 0) + ")"};
}

// ---- 8: determinism -------------------------------------------------------

int cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) std::cerr << "  cli failed (" << code << "): " << err.str();
    return code;
}

// Byte-compares every regular file under two directories.
std::size_t differing_files(const fs::path& a, const fs::path& b, std::size_t& compared) {
    std::size_t diff = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        ++compared;
        const auto other = b / fs::relative(entry.path(), a);
        if (!fs::exists(other) || read_text_file(entry.path()) != read_text_file(other)) ++diff;
    }
    return diff;
}

Outcome determinism() {
    const auto dir = scratch("determinism");
    std::size_t failures = 0, compared = 0, differing = 0;
    const std::vector<std::string> synth{"synth", "--classes", "200", "--depth", "4", "--images", "400",
                                         "--neurons", "16", "--planted", "8"};

    for (const char* run : {"a", "b"}) {
        const auto root = dir / run;
        auto with_out = [&](std::vector<std::string> args, const fs::path& out) {
            args.push_back("--out-dir");
            args.push_back(out.string());
            failures += cli(std::move(args)) != 0 ? 1 : 0;
        };
        const auto bundle = root / "bundle";
        with_out(synth, bundle);
        const std::vector<std::string> kb{"--hierarchy", (bundle / "hierarchy.tsv").string(), "--annotations",
                                          (bundle / "annotations.json").string()};
        auto args = [&](std::string cmd, std::vector<std::string> extra) {
            std::vector<std::string> a{std::move(cmd)};
            a.insert(a.end(), extra.begin(), extra.end());
            return a;
        };

        auto label = args("label", kb);
        label.insert(label.end(), {"--activations", (bundle / "activations.csv").string()});
        with_out(label, root / "label");

        with_out(args("pipeline", {"--bundle", bundle.string(), "--permutations", "100"}), root / "pipeline");

        // single stages fed from the pipeline's own manifests
        const auto labels = root / "label" / "labels.csv";
        const auto manifest = root / "pipeline" / "confirm_manifest.json";
        for (const char* stage : {"confirm", "eval"}) {
            with_out(args(stage, {"--activations", (bundle / "activations.csv").string(), "--labels",
                                  labels.string(), "--manifest", manifest.string()}),
                     root / stage);
        }

        const auto sets = read_manifest_json(manifest);
        write_concept_manifest_json(root / "concepts.json", sample_negatives(sets, 42));
        with_out(args("concept-activation", {"--activations", (bundle / "activations.csv").string(), "--concepts",
                                             "induced=" + (root / "concepts.json").string(), "--permutations", "100"}),
                 root / "concepts");

        with_out(args("bin", {"--values", "induced=" + (root / "confirm" / "confirmation.csv").string()}),
                 root / "bin");

        const auto& first = sets.begin()->second;
        write_text_file(root / "pos.txt", [&](std::ostream& o) {
            for (const auto& img : first) o << img << '\n';
        });
        std::set<std::string> negatives;
        for (const auto& [label_name, imgs] : sets) negatives.insert(imgs.begin(), imgs.end());
        for (const auto& img : first) negatives.erase(img);
        write_text_file(root / "neg.txt", [&](std::ostream& o) {
            for (const auto& img : negatives) o << img << '\n';
        });
        auto induce_args = args("induce", kb);
        induce_args.insert(induce_args.end(),
                           {"--positives", (root / "pos.txt").string(), "--negatives", (root / "neg.txt").string()});
        with_out(induce_args, root / "induce");
    }
    differing = differing_files(dir / "a", dir / "b", compared);
    return {failures == 0 && differing == 0 && compared > 0,
            std::to_string(compared - differing) + "/" + std::to_string(compared) +
                " output files byte-identical across two runs of synth, label, induce, confirm, eval, "
                "concept-activation, bin and pipeline" +
                (failures ? " (" + std::to_string(failures) + " stage failures)" : "")};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc == 3 && std::string(argv[1]) == "--parse-only") return parse_only(argv[2]);

    const std::string self = fs::absolute(argv[0]).string();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"induction oracle equivalence", induction_oracle},
        {"synthetic end-to-end recovery", synthetic_recovery},
        {"coverage formula", coverage_formula},
        {"Mann-Whitney correctness", mann_whitney},
        {"relevance binning fixture", relevance_bins},
        {"CAV/CAR behavior", concept_classifiers},
        {"scale budget", [&] { return scale(self); }},
        {"determinism", determinism},
    };
    // coverage (3rd above) reports on hypotheses gathered by the two runs before it
    const int number[] = {1, 4, 2, 3, 5, 6, 7, 8};

    std::vector<std::string> lines(criteria.size());
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        lines[static_cast<std::size_t>(number[i] - 1)] = std::string(o.pass ? "[PASS] " : "[FAIL] ") +
                                                         std::to_string(number[i]) + " " + criteria[i].first + ": " +
                                                         o.detail + " [" + fmt(seconds_since(t0), 1) + " s]";
        std::cerr << "  done " << number[i] << '\n';
    }
    for (const auto& l : lines) std::cout << l << '\n';
    std::cout << (failed ? std::to_string(failed) + " criteria failed\n" : "all criteria passed\n");
    return failed ? 1 : 0;
}
