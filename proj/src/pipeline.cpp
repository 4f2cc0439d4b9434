#include "conlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "conlab/error.hpp"
#include "conlab/io.hpp"
#include "conlab/reports.hpp"
#include "conlab/statistics.hpp"

namespace conlab {

ImageSetManifest retrieve_from_kb(const KnowledgeBase& kb, std::span<const std::string> labels) {
    ImageSetManifest out;
    for (const auto& label : labels) {
        std::optional<ClassExpression> expr;
        try {
            expr = kb.parse_expression(label);
        } catch (const Error& e) {
            if (e.kind() != Error::Kind::NotFound && e.kind() != Error::Kind::InvalidArgument) throw;
            continue;
        }
        std::vector<std::string> images;
        for (auto id : kb.extension(*expr)) images.push_back(kb.image_name(id));
        if (images.empty()) continue;
        std::sort(images.begin(), images.end());
        out[canonical_label(label)] = std::move(images);
    }
    return out;
}

ManifestSplit split_manifest(const ImageSetManifest& manifest, double confirm_fraction, std::uint64_t seed) {
    if (!(confirm_fraction > 0.0 && confirm_fraction < 1.0))
        throw Error(Error::Kind::InvalidConfig, "confirm fraction must lie in (0, 1)");
    ManifestSplit out;
    std::mt19937_64 rng(seed);
    for (const auto& [label, images] : manifest) {
        std::vector<std::string> shuffled = images;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::size_t n_confirm = shuffled.size();
        if (shuffled.size() >= 2) {
            const auto want = static_cast<std::size_t>(std::lround(confirm_fraction * static_cast<double>(shuffled.size())));
            n_confirm = std::clamp<std::size_t>(want, 1, shuffled.size() - 1);
        }
        std::vector<std::string> confirm(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_confirm));
        std::vector<std::string> eval(shuffled.begin() + static_cast<std::ptrdiff_t>(n_confirm), shuffled.end());
        std::sort(confirm.begin(), confirm.end());
        std::sort(eval.begin(), eval.end());
        out.confirm[label] = std::move(confirm);
        if (!eval.empty()) out.eval[label] = std::move(eval);
    }
    return out;
}

namespace {

std::set<std::string> rows_of(const ImageSetManifest& manifest, const std::string& key) {
    const auto it = manifest.find(key);
    if (it == manifest.end()) return {};
    return {it->second.begin(), it->second.end()};
}

bool has_non_target(const ImageSetManifest& manifest, const std::string& key) {
    const auto target = rows_of(manifest, key);
    for (const auto& [label, images] : manifest) {
        if (canonical_label(label) == key) continue;
        for (const auto& img : images) {
            if (!target.contains(img)) return true;
        }
    }
    return false;
}

}  // namespace

MethodOutcome analyze_method(const std::string& method, std::vector<NeuronLabel> labels, const ActivationMatrix& pool,
                             const ActivationMatrix& retrieved, const ManifestSplit& manifests,
                             const PipelineConfig& cfg) {
    MethodOutcome out;
    out.method = method;
    std::set<std::string> missing;
    for (auto& l : labels) {
        const auto key = canonical_label(l.label);
        const auto it = manifests.confirm.find(key);
        const bool usable = it != manifests.confirm.end() && !it->second.empty() &&
                            pool.per_neuron_max()(static_cast<Eigen::Index>(l.neuron)) > 0.0;
        if (usable)
            out.labels.push_back(std::move(l));
        else
            missing.insert(key);
    }
    out.missing_labels.assign(missing.begin(), missing.end());
    out.confirmation = confirm_labels(pool, retrieved, out.labels, manifests.confirm, cfg.thresholds);

    std::vector<NeuronLabel> confirmed;
    for (const auto& rec : out.confirmation) {
        const auto key = canonical_label(rec.label);
        if (rec.confirmed && !rows_of(manifests.eval, key).empty() && has_non_target(manifests.eval, key))
            confirmed.push_back({rec.neuron, rec.label});
    }
    out.evaluation = evaluate_labels(pool, retrieved, confirmed, manifests.eval, cfg.thresholds);

    if (!cfg.concept_activation) return out;
    std::map<std::string, std::vector<std::string>> image_sets;
    for (const auto& key : unique_labels(out.labels)) {
        auto images = rows_of(manifests.confirm, key);
        images.merge(rows_of(manifests.eval, key));
        image_sets[key].assign(images.begin(), images.end());
    }
    const auto concepts = sample_negatives(image_sets, cfg.classifier.rng_seed);
    for (const auto& [name, images] : concepts) {
        if (images.positive.size() < cfg.classifier.kfold_k || images.negative.size() < cfg.classifier.kfold_k) {
            out.skipped_concepts.push_back(name);
            continue;
        }
        const auto ds = make_dataset(name, retrieved, images);
        for (auto kind : {ClassifierKind::Linear, ClassifierKind::Kernel})
            out.concepts.push_back(analyze_concept(ds, kind, cfg.classifier));
    }
    return out;
}

namespace {

void write_method(const std::filesystem::path& dir, const MethodOutcome& m, const std::map<std::size_t, double>& coverage) {
    std::filesystem::create_directories(dir);
    write_labels_csv(dir / "labels.csv", m.labels);
    write_confirmation_report(dir, m.confirmation, coverage);
    write_evaluation_report(dir, m.evaluation);
    write_concept_report(dir, m.concepts);
}

}  // namespace

PipelineSummary run_pipeline(const PipelineInputs& inputs, const PipelineConfig& cfg,
                             const std::filesystem::path& out_dir) {
    validate(cfg.thresholds);
    validate(cfg.induction);
    validate(cfg.classifier);
    auto hierarchy = std::make_shared<const ClassHierarchy>(read_hierarchy_file(inputs.hierarchy));
    const auto annotations = read_annotations_json(inputs.annotations);
    const auto kb = build_kb(hierarchy, annotations, cfg.max_edit_distance);
    const auto pool = read_activation_csv(inputs.activations);
    const auto retrieved =
        inputs.retrieved_activations ? read_activation_csv(*inputs.retrieved_activations) : pool;
    std::filesystem::create_directories(out_dir);

    PipelineSummary summary;
    summary.neurons = pool.neuron_count();
    const auto records = label_neurons(pool, kb, cfg.thresholds, cfg.induction);
    write_label_report(out_dir, records, *hierarchy);
    const auto induced = target_labels(records, *hierarchy);
    summary.labeled = induced.size();
    std::map<std::size_t, double> coverage;
    for (const auto& rec : records) {
        if (!rec.skipped && !rec.hypotheses.empty()) coverage[rec.neuron] = rec.hypotheses.front().coverage;
    }

    std::vector<std::pair<std::string, std::vector<NeuronLabel>>> methods{{kInducedMethod, induced}};
    for (const auto& [name, path] : inputs.external_labels)
        methods.emplace_back(name, read_labels_csv(path, pool.neuron_count()));

    ManifestSplit manifests;
    if (inputs.confirm_manifest || inputs.eval_manifest) {
        if (!inputs.confirm_manifest || !inputs.eval_manifest)
            throw Error(Error::Kind::InvalidConfig, "confirm and eval manifests must be given together");
        manifests.confirm = read_manifest_json(*inputs.confirm_manifest);
        manifests.eval = read_manifest_json(*inputs.eval_manifest);
    } else {
        std::vector<std::string> all;
        for (const auto& [name, labels] : methods) {
            for (const auto& key : unique_labels(labels)) all.push_back(key);
        }
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        manifests = split_manifest(retrieve_from_kb(kb, all), cfg.confirm_fraction, cfg.seed);
    }
    write_manifest_json(out_dir / "confirm_manifest.json", manifests.confirm);
    write_manifest_json(out_dir / "eval_manifest.json", manifests.eval);

    MethodAccuracies accuracies;
    std::map<std::string, RelevanceBins> bins;
    for (auto& [name, labels] : methods) {
        auto outcome = analyze_method(name, std::move(labels), pool, retrieved, manifests, cfg);
        write_method(out_dir / name, outcome, name == kInducedMethod ? coverage : std::map<std::size_t, double>{});
        for (const auto& r : outcome.concepts) accuracies[name][r.kind].push_back(r.test_accuracy);
        std::vector<double> target_pct;
        for (const auto& e : outcome.evaluation) target_pct.push_back(e.target.activation_pct);
        bins[name] = bin_relevance(target_pct);
        summary.methods.push_back(std::move(outcome));
    }
    write_method_comparison(out_dir, accuracies);
    write_bins_report(out_dir, "relevance_bins", bins);

    if (inputs.ground_truth) {
        std::map<std::size_t, ClassId> truth;
        for (const auto& [neuron, name] : read_ground_truth_json(*inputs.ground_truth)) truth[neuron] = hierarchy->id(name);
        summary.recovery = recovery(records, truth, *hierarchy);
        write_recovery_report(out_dir, *summary.recovery);
    }
    return summary;
}

}  // namespace conlab
