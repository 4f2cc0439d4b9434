#include "conlab/neuron_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "conlab/error.hpp"
#include "conlab/parallel.hpp"
#include "conlab/tag_mapping.hpp"

namespace conlab {

ActivationMatrix::ActivationMatrix(std::vector<std::string> image_names, Eigen::MatrixXd values)
    : names_(std::move(image_names)), values_(std::move(values)) {
    if (static_cast<Eigen::Index>(names_.size()) != values_.rows())
        throw Error(Error::Kind::Format, "activation matrix: " + std::to_string(names_.size()) + " names for " +
                                             std::to_string(values_.rows()) + " rows");
    for (std::size_t r = 0; r < names_.size(); ++r) {
        if (!lookup_.emplace(names_[r], r).second)
            throw Error(Error::Kind::Format, "activation matrix: duplicate image '" + names_[r] + "'");
        for (Eigen::Index c = 0; c < values_.cols(); ++c) {
            const double v = values_(static_cast<Eigen::Index>(r), c);
            if (!std::isfinite(v) || v < 0.0)
                throw Error(Error::Kind::Format, "activation matrix: invalid value at image '" + names_[r] +
                                                     "', neuron " + std::to_string(c));
        }
    }
    max_ = values_.rows() > 0 ? Eigen::VectorXd(values_.colwise().maxCoeff().transpose())
                              : Eigen::VectorXd::Zero(values_.cols());
}

std::optional<std::size_t> ActivationMatrix::find_row(std::string_view image) const {
    const auto it = lookup_.find(std::string(image));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t ActivationMatrix::row(std::string_view image) const {
    if (auto r = find_row(image)) return *r;
    throw Error(Error::Kind::NotFound, "image '" + std::string(image) + "' not in activation matrix");
}

void validate(const ThresholdConfig& t) {
    const bool ok = t.lo_fraction > 0.0 && t.lo_fraction < t.hi_fraction && t.hi_fraction <= 1.0 &&
                    t.confirm_fraction > 0.0 && t.confirm_fraction <= 1.0 && t.activate_fraction > 0.0 &&
                    t.activate_fraction <= 1.0;
    if (!ok)
        throw Error(Error::Kind::InvalidConfig,
                    "thresholds need 0 < lo < hi <= 1, 0 < confirm <= 1 and 0 < activate <= 1");
}

namespace {

void check_neuron(const ActivationMatrix& m, std::size_t neuron) {
    if (neuron >= m.neuron_count())
        throw Error(Error::Kind::NotFound, "neuron " + std::to_string(neuron) + " out of range (" +
                                               std::to_string(m.neuron_count()) + " neurons)");
}

}  // namespace

std::optional<ExampleSets> example_sets(const ActivationMatrix& m, std::size_t neuron, const ThresholdConfig& t) {
    validate(t);
    check_neuron(m, neuron);
    const double max = m.per_neuron_max()(static_cast<Eigen::Index>(neuron));
    if (max <= 0.0) return std::nullopt;
    ExampleSets ex;
    const double hi = t.hi_fraction * max;
    const double lo = t.lo_fraction * max;
    for (std::size_t r = 0; r < m.image_count(); ++r) {
        const double v = m.value(r, neuron);
        if (v >= hi)
            ex.positives.push_back(ImageId{static_cast<std::uint32_t>(r)});
        else if (v <= lo)
            ex.negatives.push_back(ImageId{static_cast<std::uint32_t>(r)});
    }
    return ex;
}

std::vector<NeuronLabelRecord> label_neurons(const ActivationMatrix& m, const KnowledgeBase& kb,
                                             const ThresholdConfig& t, const InductionConfig& cfg) {
    validate(t);
    validate(cfg);
    std::vector<ImageId> to_kb(m.image_count());
    for (std::size_t r = 0; r < m.image_count(); ++r) to_kb[r] = kb.image(m.image_names()[r]);

    std::vector<NeuronLabelRecord> records(m.neuron_count());
    parallel_for(m.neuron_count(), [&](std::size_t j) {
        auto& rec = records[j];
        rec.neuron = j;
        auto ex = example_sets(m, j, t);
        if (!ex) {
            rec.skipped = true;
            return;
        }
        for (auto& id : ex->positives) id = to_kb[id.value];
        for (auto& id : ex->negatives) id = to_kb[id.value];
        rec.hypotheses = induce(kb, *ex, cfg);
    });
    return records;
}

double activation_rate(const ActivationMatrix& m, std::size_t neuron, std::span<const std::size_t> rows,
                       const ThresholdConfig& t, std::optional<double> reference_max) {
    validate(t);
    check_neuron(m, neuron);
    if (rows.empty()) throw Error(Error::Kind::InvalidArgument, "activation rate over an empty image set");
    const double max = reference_max.value_or(m.per_neuron_max()(static_cast<Eigen::Index>(neuron)));
    if (!(max > 0.0))
        throw Error(Error::Kind::InvalidArgument, "neuron " + std::to_string(neuron) + " has no positive maximum");
    const double threshold = t.activate_fraction * max;
    std::size_t hits = 0;
    for (auto r : rows) {
        if (r >= m.image_count()) throw Error(Error::Kind::NotFound, "row " + std::to_string(r) + " out of range");
        hits += m.value(r, neuron) >= threshold ? 1 : 0;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(rows.size());
}

std::vector<NeuronLabel> target_labels(std::span<const NeuronLabelRecord> records, const ClassHierarchy& h) {
    std::vector<NeuronLabel> out;
    for (const auto& rec : records) {
        if (rec.skipped || rec.hypotheses.empty()) continue;
        out.push_back({rec.neuron, rec.hypotheses.front().expression.render(h)});
    }
    return out;
}

std::string canonical_label(std::string_view label) {
    std::string out;
    std::size_t start = 0;
    while (true) {
        const auto comma = label.find(',', start);
        const auto piece = normalize_tag(label.substr(start, comma == std::string_view::npos ? label.npos : comma - start));
        if (!piece.empty()) {
            if (!out.empty()) out += ", ";
            out += piece;
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::string> unique_labels(std::span<const NeuronLabel> labels) {
    std::set<std::string> seen;
    for (const auto& l : labels) seen.insert(canonical_label(l.label));
    return {seen.begin(), seen.end()};
}

namespace {

// Canonical label -> sorted unique rows of `retrieved`.
std::map<std::string, std::vector<std::size_t>> resolve_manifest(const ImageSetManifest& manifest,
                                                                 const ActivationMatrix& retrieved) {
    std::map<std::string, std::vector<std::size_t>> out;
    for (const auto& [label, images] : manifest) {
        auto& rows = out[canonical_label(label)];
        for (const auto& img : images) rows.push_back(retrieved.row(img));
    }
    for (auto& [label, rows] : out) {
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    }
    return out;
}

struct TargetSplit {
    const std::vector<std::size_t>* target = nullptr;
    std::vector<std::size_t> others;
};

TargetSplit split_for(const std::map<std::string, std::vector<std::size_t>>& sets, const NeuronLabel& label) {
    const auto key = canonical_label(label.label);
    const auto it = sets.find(key);
    if (it == sets.end())
        throw Error(Error::Kind::NotFound, "no image set for label '" + label.label + "' (neuron " +
                                               std::to_string(label.neuron) + ")");
    TargetSplit split;
    split.target = &it->second;
    for (const auto& [other, rows] : sets) {
        if (other != key) split.others.insert(split.others.end(), rows.begin(), rows.end());
    }
    std::sort(split.others.begin(), split.others.end());
    split.others.erase(std::unique(split.others.begin(), split.others.end()), split.others.end());
    std::vector<std::size_t> filtered;
    std::set_difference(split.others.begin(), split.others.end(), split.target->begin(), split.target->end(),
                        std::back_inserter(filtered));
    split.others = std::move(filtered);
    return split;
}

double pool_max(const ActivationMatrix& pool, const ActivationMatrix& retrieved, std::size_t neuron) {
    check_neuron(pool, neuron);
    check_neuron(retrieved, neuron);
    const double max = pool.per_neuron_max()(static_cast<Eigen::Index>(neuron));
    if (!(max > 0.0))
        throw Error(Error::Kind::InvalidArgument,
                    "neuron " + std::to_string(neuron) + " never activates in the labeling pool");
    return max;
}

}  // namespace

std::vector<ConfirmationRecord> confirm_labels(const ActivationMatrix& pool, const ActivationMatrix& retrieved,
                                               std::span<const NeuronLabel> labels, const ImageSetManifest& manifest,
                                               const ThresholdConfig& t) {
    validate(t);
    const auto sets = resolve_manifest(manifest, retrieved);
    std::vector<ConfirmationRecord> out;
    out.reserve(labels.size());
    for (const auto& label : labels) {
        const double max = pool_max(pool, retrieved, label.neuron);
        const auto split = split_for(sets, label);
        if (split.target->empty())
            throw Error(Error::Kind::InvalidArgument, "label '" + label.label + "' has no target images");
        ConfirmationRecord rec;
        rec.neuron = label.neuron;
        rec.label = label.label;
        rec.image_count = split.target->size();
        rec.target_pct = activation_rate(retrieved, label.neuron, *split.target, t, max);
        rec.non_target_pct = split.others.empty() ? 0.0 : activation_rate(retrieved, label.neuron, split.others, t, max);
        rec.confirmed = rec.target_pct >= 100.0 * t.confirm_fraction;
        out.push_back(std::move(rec));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.neuron < b.neuron; });
    return out;
}

std::vector<EvaluationRecord> evaluate_labels(const ActivationMatrix& pool, const ActivationMatrix& retrieved,
                                              std::span<const NeuronLabel> labels, const ImageSetManifest& manifest,
                                              const ThresholdConfig& t) {
    validate(t);
    const auto sets = resolve_manifest(manifest, retrieved);
    std::vector<EvaluationRecord> out;
    out.reserve(labels.size());
    for (const auto& label : labels) {
        const double max = pool_max(pool, retrieved, label.neuron);
        const auto split = split_for(sets, label);
        if (split.target->empty() || split.others.empty())
            throw Error(Error::Kind::InvalidArgument,
                        "label '" + label.label + "' needs both target and non-target evaluation images");
        auto column = [&](std::span<const std::size_t> rows) {
            std::vector<double> v;
            v.reserve(rows.size());
            for (auto r : rows) v.push_back(retrieved.value(r, label.neuron));
            return v;
        };
        const auto target = column(*split.target);
        const auto others = column(split.others);
        EvaluationRecord rec;
        rec.neuron = label.neuron;
        rec.label = label.label;
        rec.target = summarize(target, t.activate_fraction * max);
        rec.non_target = summarize(others, t.activate_fraction * max);
        rec.mwu = mann_whitney_u(target, others);
        out.push_back(std::move(rec));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.neuron < b.neuron; });
    return out;
}

}  // namespace conlab
