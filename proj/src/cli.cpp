#include "conlab/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "conlab/concept_activation.hpp"
#include "conlab/induction.hpp"
#include "conlab/io.hpp"
#include "conlab/knowledge_base.hpp"
#include "conlab/neuron_analysis.hpp"
#include "conlab/pipeline.hpp"
#include "conlab/reports.hpp"
#include "conlab/statistics.hpp"
#include "conlab/synthetic.hpp"

namespace conlab {

namespace fs = std::filesystem;

int exit_code(Error::Kind kind) {
    switch (kind) {
        case Error::Kind::InvalidArgument: return kExitInvalidArgument;
        case Error::Kind::InvalidConfig: return kExitInvalidConfig;
        case Error::Kind::Io: return kExitIo;
        case Error::Kind::Format: return kExitFormat;
        case Error::Kind::Cycle: return kExitCycle;
        case Error::Kind::NotFound: return kExitNotFound;
        case Error::Kind::Numerical: return kExitNumerical;
    }
    return kExitInternal;
}

namespace {

struct Options {
    // inputs
    fs::path hierarchy, annotations, activations, retrieved, labels, manifest, confirm_manifest, eval_manifest,
        ground_truth, positives, negatives, bundle;
    std::vector<std::string> concepts, externals, values;
    fs::path out_dir = ".";
    // thresholds
    ThresholdConfig thresholds;
    InductionConfig induction;
    ClassifierConfig classifier;
    std::size_t max_edit_distance = 0;
    std::uint64_t seed = 42;
    bool no_concepts = false;
    SyntheticConfig synth;
};

void add_threshold_flags(CLI::App* cmd, Options& o, bool example_sets, bool confirm) {
    if (example_sets) {
        cmd->add_option("--hi", o.thresholds.hi_fraction, "positive example cutoff as a fraction of the neuron max")
            ->capture_default_str();
        cmd->add_option("--lo", o.thresholds.lo_fraction, "negative example cutoff as a fraction of the neuron max")
            ->capture_default_str();
    }
    if (confirm)
        cmd->add_option("--confirm-threshold", o.thresholds.confirm_fraction,
                        "share of target images that must activate")
            ->capture_default_str();
    cmd->add_option("--activate-threshold", o.thresholds.activate_fraction,
                    "activation cutoff as a fraction of the pool max")
        ->capture_default_str();
}

void add_induction_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--beam", o.induction.beam_width, "atoms kept for conjunction")->capture_default_str();
    cmd->add_option("--top-k", o.induction.top_k, "hypotheses reported per neuron")->capture_default_str();
    cmd->add_option("--max-conjuncts", o.induction.max_conjuncts, "largest conjunction size")->capture_default_str();
    cmd->add_option("--max-edit-distance", o.max_edit_distance, "Levenshtein bound for tag mapping")
        ->capture_default_str();
}

void add_classifier_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--permutations", o.classifier.permutations, "label permutations for k-fold p-values")
        ->capture_default_str();
    cmd->add_option("--folds", o.classifier.kfold_k, "k for k-fold cross-validation")->capture_default_str();
    cmd->add_option("--c", o.classifier.c, "soft-margin regularization")->capture_default_str();
    cmd->add_option("--split", o.classifier.split_fraction, "training share of each concept dataset")
        ->capture_default_str();
}

KnowledgeBase load_kb(const Options& o) {
    auto h = std::make_shared<const ClassHierarchy>(read_hierarchy_file(o.hierarchy));
    return build_kb(std::move(h), read_annotations_json(o.annotations), o.max_edit_distance);
}

std::pair<std::string, fs::path> named_path(const std::string& entry) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) return {fs::path(entry).stem().string(), fs::path(entry)};
    if (eq == 0) throw Error(Error::Kind::InvalidArgument, "empty method name in '" + entry + "'");
    return {entry.substr(0, eq), fs::path(entry.substr(eq + 1))};
}

std::vector<double> read_percentages(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::optional<std::size_t> column;
    std::vector<double> out;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (line_no == 1) {
            for (const char* name : {"targ_activation_pct", "target_pct"}) {
                const auto it = std::find(fields.begin(), fields.end(), name);
                if (it != fields.end()) {
                    column = static_cast<std::size_t>(it - fields.begin());
                    break;
                }
            }
            if (column) continue;
        }
        const std::size_t c = column.value_or(0);
        if (c >= fields.size())
            throw Error(Error::Kind::Format, path.string() + ":" + std::to_string(line_no) + ": missing column");
        try {
            std::size_t used = 0;
            const double v = std::stod(fields[c], &used);
            if (used != fields[c].size()) throw std::invalid_argument("trailing");
            out.push_back(v);
        } catch (const std::logic_error&) {
            throw Error(Error::Kind::Format,
                        path.string() + ":" + std::to_string(line_no) + ": not a number '" + fields[c] + "'");
        }
    }
    return out;
}

int cmd_induce(const Options& o, std::ostream& out) {
    const auto kb = load_kb(o);
    ExampleSets ex;
    for (const auto& name : read_image_list(o.positives)) ex.positives.push_back(kb.image(name));
    for (const auto& name : read_image_list(o.negatives)) ex.negatives.push_back(kb.image(name));
    const auto hyps = induce(kb, ex, o.induction);
    fs::create_directories(o.out_dir);
    write_hypotheses_report(o.out_dir, hyps, kb.hierarchy());
    for (const auto& h : hyps)
        out << h.expression.render(kb.hierarchy()) << '\t' << format_fixed(h.coverage, 3) << '\n';
    return kExitOk;
}

int cmd_label(const Options& o, std::ostream& out) {
    const auto kb = load_kb(o);
    const auto m = read_activation_csv(o.activations);
    const auto records = label_neurons(m, kb, o.thresholds, o.induction);
    fs::create_directories(o.out_dir);
    write_label_report(o.out_dir, records, kb.hierarchy());
    const auto labels = target_labels(records, kb.hierarchy());
    write_labels_csv(o.out_dir / "labels.csv", labels);
    out << labels.size() << " of " << m.neuron_count() << " neurons labeled\n";
    return kExitOk;
}

int cmd_confirm(const Options& o, std::ostream& out) {
    const auto pool = read_activation_csv(o.activations);
    const auto retrieved = o.retrieved.empty() ? pool : read_activation_csv(o.retrieved);
    const auto labels = read_labels_csv(o.labels, pool.neuron_count());
    const auto records = confirm_labels(pool, retrieved, labels, read_manifest_json(o.manifest), o.thresholds);
    fs::create_directories(o.out_dir);
    write_confirmation_report(o.out_dir, records);
    std::vector<NeuronLabel> confirmed;
    for (const auto& r : records) {
        if (r.confirmed) confirmed.push_back({r.neuron, r.label});
    }
    write_labels_csv(o.out_dir / "confirmed_labels.csv", confirmed);
    out << confirmed.size() << " of " << records.size() << " labels confirmed\n";
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const auto pool = read_activation_csv(o.activations);
    const auto retrieved = o.retrieved.empty() ? pool : read_activation_csv(o.retrieved);
    const auto labels = read_labels_csv(o.labels, pool.neuron_count());
    const auto records = evaluate_labels(pool, retrieved, labels, read_manifest_json(o.manifest), o.thresholds);
    fs::create_directories(o.out_dir);
    write_evaluation_report(o.out_dir, records);
    out << records.size() << " labels evaluated\n";
    return kExitOk;
}

int cmd_concepts(const Options& o, std::ostream& out) {
    const auto m = read_activation_csv(o.activations);
    MethodAccuracies accuracies;
    fs::create_directories(o.out_dir);
    for (const auto& entry : o.concepts) {
        const auto [method, path] = named_path(entry);
        std::vector<ConceptResult> results;
        for (const auto& [name, images] : read_concept_manifest_json(path)) {
            const auto ds = make_dataset(name, m, images);
            for (auto kind : {ClassifierKind::Linear, ClassifierKind::Kernel}) {
                results.push_back(analyze_concept(ds, kind, o.classifier));
                accuracies[method][kind].push_back(results.back().test_accuracy);
            }
        }
        fs::create_directories(o.out_dir / method);
        write_concept_report(o.out_dir / method, results);
        out << method << ": " << results.size() / 2 << " concepts\n";
    }
    write_method_comparison(o.out_dir, accuracies);
    return kExitOk;
}

int cmd_bin(const Options& o, std::ostream& out) {
    std::map<std::string, RelevanceBins> bins;
    for (const auto& entry : o.values) {
        const auto [method, path] = named_path(entry);
        bins[method] = bin_relevance(read_percentages(path));
    }
    fs::create_directories(o.out_dir);
    write_bins_report(o.out_dir, "relevance_bins", bins);
    for (const auto& [method, b] : bins) out << method << '\t' << b.high << '\t' << b.medium << '\t' << b.low << '\n';
    return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
    const auto bundle = generate(o.synth);
    write_bundle(bundle, o.out_dir);
    out << "wrote " << bundle.hierarchy->class_count() << " classes, " << bundle.annotations.size() << " images, "
        << bundle.ground_truth.size() << " planted neurons to " << o.out_dir.string() << '\n';
    return kExitOk;
}

int cmd_pipeline(const Options& o, std::ostream& out) {
    PipelineInputs in;
    if (!o.bundle.empty()) {
        in.hierarchy = o.bundle / "hierarchy.tsv";
        in.annotations = o.bundle / "annotations.json";
        in.activations = o.bundle / "activations.csv";
        if (fs::exists(o.bundle / "ground_truth.json")) in.ground_truth = o.bundle / "ground_truth.json";
    }
    if (!o.hierarchy.empty()) in.hierarchy = o.hierarchy;
    if (!o.annotations.empty()) in.annotations = o.annotations;
    if (!o.activations.empty()) in.activations = o.activations;
    if (in.hierarchy.empty() || in.annotations.empty() || in.activations.empty())
        throw Error(Error::Kind::InvalidConfig, "pipeline needs --bundle or --hierarchy, --annotations and --activations");
    if (!o.retrieved.empty()) in.retrieved_activations = o.retrieved;
    if (!o.confirm_manifest.empty()) in.confirm_manifest = o.confirm_manifest;
    if (!o.eval_manifest.empty()) in.eval_manifest = o.eval_manifest;
    if (!o.ground_truth.empty()) in.ground_truth = o.ground_truth;
    for (const auto& entry : o.externals) {
        const auto [method, path] = named_path(entry);
        if (method == kInducedMethod) throw Error(Error::Kind::InvalidArgument, "method name is reserved: " + method);
        in.external_labels[method] = path;
    }

    PipelineConfig cfg;
    cfg.thresholds = o.thresholds;
    cfg.induction = o.induction;
    cfg.classifier = o.classifier;
    cfg.classifier.rng_seed = o.seed;
    cfg.max_edit_distance = o.max_edit_distance;
    cfg.seed = o.seed;
    cfg.concept_activation = !o.no_concepts;
    const auto summary = run_pipeline(in, cfg, o.out_dir);

    out << summary.labeled << " of " << summary.neurons << " neurons labeled\n";
    for (const auto& m : summary.methods) {
        const auto confirmed = std::count_if(m.confirmation.begin(), m.confirmation.end(),
                                             [](const auto& r) { return r.confirmed; });
        out << m.method << ": " << confirmed << " of " << m.confirmation.size() << " confirmed, "
            << m.evaluation.size() << " evaluated, " << m.concepts.size() << " classifiers\n";
    }
    if (summary.recovery)
        out << "recovered " << summary.recovery->recovered << " of " << summary.recovery->planted
            << " planted neurons\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Neuron labeling with concept induction over a class hierarchy", "conlab"};
    app.require_subcommand(1);
    Options o;

    auto* induce_cmd = app.add_subcommand("induce", "rank class expressions for positive/negative image lists");
    induce_cmd->add_option("--hierarchy", o.hierarchy, "child<TAB>parent TSV")->required();
    induce_cmd->add_option("--annotations", o.annotations, "{image: [tags]} JSON")->required();
    induce_cmd->add_option("--positives", o.positives, "positive image names, one per line")->required();
    induce_cmd->add_option("--negatives", o.negatives, "negative image names, one per line")->required();
    add_induction_flags(induce_cmd, o);

    auto* label_cmd = app.add_subcommand("label", "induce label hypotheses for every neuron");
    label_cmd->add_option("--hierarchy", o.hierarchy)->required();
    label_cmd->add_option("--annotations", o.annotations)->required();
    label_cmd->add_option("--activations", o.activations, "activation CSV")->required();
    add_threshold_flags(label_cmd, o, true, false);
    add_induction_flags(label_cmd, o);

    auto* confirm_cmd = app.add_subcommand("confirm", "apply the confirmation rule to labels");
    confirm_cmd->add_option("--activations", o.activations, "labeling pool activations")->required();
    confirm_cmd->add_option("--retrieved", o.retrieved, "activations of retrieved images (default: pool)");
    confirm_cmd->add_option("--labels", o.labels, "neuron,label CSV")->required();
    confirm_cmd->add_option("--manifest", o.manifest, "{label: [images]} JSON")->required();
    add_threshold_flags(confirm_cmd, o, false, true);

    auto* eval_cmd = app.add_subcommand("eval", "Mann-Whitney evaluation of confirmed labels");
    eval_cmd->add_option("--activations", o.activations)->required();
    eval_cmd->add_option("--retrieved", o.retrieved);
    eval_cmd->add_option("--labels", o.labels)->required();
    eval_cmd->add_option("--manifest", o.manifest)->required();
    add_threshold_flags(eval_cmd, o, false, false);

    auto* concept_cmd = app.add_subcommand("concept-activation", "linear and kernel concept classifiers");
    concept_cmd->add_option("--activations", o.activations)->required();
    concept_cmd->add_option("--concepts", o.concepts, "[method=]concept manifest JSON, repeatable")->required();
    concept_cmd->add_option("--seed", o.classifier.rng_seed)->capture_default_str();
    add_classifier_flags(concept_cmd, o);

    auto* bin_cmd = app.add_subcommand("bin", "relevance bins of target activation percentages");
    bin_cmd->add_option("--values", o.values, "[method=]CSV of percentages, repeatable")->required();

    auto* synth_cmd = app.add_subcommand("synth", "generate a planted-concept bundle");
    synth_cmd->add_option("--seed", o.synth.rng_seed)->capture_default_str();
    synth_cmd->add_option("--classes", o.synth.class_count)->capture_default_str();
    synth_cmd->add_option("--depth", o.synth.depth)->capture_default_str();
    synth_cmd->add_option("--images", o.synth.images)->capture_default_str();
    synth_cmd->add_option("--neurons", o.synth.neurons)->capture_default_str();
    synth_cmd->add_option("--planted", o.synth.planted_count)->capture_default_str();
    synth_cmd->add_option("--signal", o.synth.signal)->capture_default_str();
    synth_cmd->add_option("--noise", o.synth.noise_sigma)->capture_default_str();
    synth_cmd->add_option("--distractor-rate", o.synth.distractor_tag_rate)->capture_default_str();
    synth_cmd->add_option("--extra-parent-rate", o.synth.extra_parent_rate)->capture_default_str();

    auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage");
    pipeline_cmd->add_option("--bundle", o.bundle, "directory written by synth");
    pipeline_cmd->add_option("--hierarchy", o.hierarchy);
    pipeline_cmd->add_option("--annotations", o.annotations);
    pipeline_cmd->add_option("--activations", o.activations);
    pipeline_cmd->add_option("--retrieved", o.retrieved);
    pipeline_cmd->add_option("--confirm-manifest", o.confirm_manifest);
    pipeline_cmd->add_option("--eval-manifest", o.eval_manifest);
    pipeline_cmd->add_option("--ground-truth", o.ground_truth);
    pipeline_cmd->add_option("--external", o.externals, "method=labels CSV, repeatable");
    pipeline_cmd->add_option("--seed", o.seed)->capture_default_str();
    pipeline_cmd->add_flag("--no-concept-activation", o.no_concepts);
    add_threshold_flags(pipeline_cmd, o, true, true);
    add_induction_flags(pipeline_cmd, o);
    add_classifier_flags(pipeline_cmd, o);

    for (auto* cmd : {induce_cmd, label_cmd, confirm_cmd, eval_cmd, concept_cmd, bin_cmd, synth_cmd, pipeline_cmd})
        cmd->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        const auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "induce") return cmd_induce(o, out);
        if (name == "label") return cmd_label(o, out);
        if (name == "confirm") return cmd_confirm(o, out);
        if (name == "eval") return cmd_eval(o, out);
        if (name == "concept-activation") return cmd_concepts(o, out);
        if (name == "bin") return cmd_bin(o, out);
        if (name == "synth") return cmd_synth(o, out);
        return cmd_pipeline(o, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace conlab
