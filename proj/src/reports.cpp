#include "conlab/reports.hpp"

#include <ostream>

#include "conlab/io.hpp"
#include "json.hpp"

namespace conlab {

using ordered_json = nlohmann::ordered_json;

namespace {

void write_json(const std::filesystem::path& path, const ordered_json& doc) {
    write_text_file(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

ordered_json hypothesis_json(const ScoredHypothesis& hyp, const ClassHierarchy& h) {
    ordered_json conj = ordered_json::array();
    for (auto c : hyp.expression.conjuncts()) conj.push_back(h.name(c));
    return {{"label", hyp.expression.render(h)},
            {"conjuncts", conj},
            {"coverage", hyp.coverage},
            {"z1", hyp.z1_count},
            {"z2", hyp.z2_count}};
}

ordered_json mwu_json(const MwuResult& r) {
    return {{"u", r.u_statistic}, {"z", r.z_score},   {"p_one_sided", r.p_one_sided},
            {"p_two_sided", r.p_two_sided}, {"n1", r.n1}, {"n2", r.n2}, {"degenerate", r.degenerate}};
}

ordered_json summary_json(const GroupSummary& s) {
    return {{"count", s.count}, {"activation_pct", s.activation_pct}, {"mean", s.mean}, {"median", s.median}};
}

}  // namespace

void write_hypotheses_report(const std::filesystem::path& dir, std::span<const ScoredHypothesis> hypotheses,
                             const ClassHierarchy& h) {
    ordered_json doc = ordered_json::array();
    for (const auto& hyp : hypotheses) doc.push_back(hypothesis_json(hyp, h));
    write_json(dir / "hypotheses.json", doc);
    write_text_file(dir / "hypotheses.csv", [&](std::ostream& out) {
        out << "rank,label,coverage,z1,z2\n";
        for (std::size_t i = 0; i < hypotheses.size(); ++i) {
            const auto& hyp = hypotheses[i];
            out << i + 1 << ',' << csv_escape(hyp.expression.render(h)) << ',' << format_fixed(hyp.coverage, 3) << ','
                << hyp.z1_count << ',' << hyp.z2_count << '\n';
        }
    });
}

void write_label_report(const std::filesystem::path& dir, std::span<const NeuronLabelRecord> records,
                        const ClassHierarchy& h) {
    ordered_json doc = ordered_json::array();
    for (const auto& rec : records) {
        ordered_json hyps = ordered_json::array();
        for (const auto& hyp : rec.hypotheses) hyps.push_back(hypothesis_json(hyp, h));
        doc.push_back({{"neuron", rec.neuron}, {"skipped", rec.skipped}, {"hypotheses", hyps}});
    }
    write_json(dir / "label_hypotheses.json", doc);
    write_text_file(dir / "label_hypotheses.csv", [&](std::ostream& out) {
        out << "neuron,rank,label,coverage,z1,z2\n";
        for (const auto& rec : records) {
            for (std::size_t i = 0; i < rec.hypotheses.size(); ++i) {
                const auto& hyp = rec.hypotheses[i];
                out << rec.neuron << ',' << i + 1 << ',' << csv_escape(hyp.expression.render(h)) << ','
                    << format_fixed(hyp.coverage, 3) << ',' << hyp.z1_count << ',' << hyp.z2_count << '\n';
            }
        }
    });
}

void write_confirmation_report(const std::filesystem::path& dir, std::span<const ConfirmationRecord> records,
                               const std::map<std::size_t, double>& coverage) {
    ordered_json doc = ordered_json::array();
    for (const auto& r : records) {
        ordered_json row = {{"neuron", r.neuron},         {"label", r.label},
                            {"images", r.image_count},    {"target_pct", r.target_pct},
                            {"non_target_pct", r.non_target_pct}, {"confirmed", r.confirmed}};
        if (auto it = coverage.find(r.neuron); it != coverage.end()) row["coverage"] = it->second;
        doc.push_back(row);
    }
    write_json(dir / "confirmation.json", doc);
    write_text_file(dir / "confirmation.csv", [&](std::ostream& out) {
        out << "neuron,label,images,coverage,target_pct,non_target_pct,confirmed\n";
        for (const auto& r : records) {
            const auto it = coverage.find(r.neuron);
            out << r.neuron << ',' << csv_escape(r.label) << ',' << r.image_count << ','
                << (it != coverage.end() ? format_fixed(it->second, 3) : std::string()) << ','
                << format_fixed(r.target_pct, 3) << ',' << format_fixed(r.non_target_pct, 3) << ','
                << (r.confirmed ? "yes" : "no") << '\n';
        }
    });
}

void write_evaluation_report(const std::filesystem::path& dir, std::span<const EvaluationRecord> records) {
    ordered_json doc = ordered_json::array();
    for (const auto& r : records) {
        doc.push_back({{"neuron", r.neuron},
                       {"label", r.label},
                       {"target", summary_json(r.target)},
                       {"non_target", summary_json(r.non_target)},
                       {"mann_whitney", mwu_json(r.mwu)}});
    }
    write_json(dir / "evaluation.json", doc);
    write_text_file(dir / "evaluation.csv", [&](std::ostream& out) {
        out << "neuron,label,images,targ_activation_pct,non_t_activation_pct,targ_mean,non_t_mean,targ_median,"
               "non_t_median,z_score,p_value\n";
        for (const auto& r : records) {
            out << r.neuron << ',' << csv_escape(r.label) << ',' << r.target.count << ','
                << format_fixed(r.target.activation_pct, 2) << ',' << format_fixed(r.non_target.activation_pct, 2) << ','
                << format_fixed(r.target.mean, 2) << ',' << format_fixed(r.non_target.mean, 2) << ','
                << format_fixed(r.target.median, 2) << ',' << format_fixed(r.non_target.median, 2) << ','
                << format_fixed(r.mwu.z_score, 2) << ',' << csv_escape(format_p_value(r.mwu.p_one_sided)) << '\n';
        }
    });
}

void write_concept_report(const std::filesystem::path& dir, std::span<const ConceptResult> results) {
    ordered_json doc = ordered_json::array();
    for (const auto& r : results) {
        doc.push_back({{"concept", r.concept_name},
                       {"method", method_name(r.kind)},
                       {"train_accuracy", r.train_accuracy},
                       {"test_accuracy", r.test_accuracy},
                       {"p_value", r.p_value},
                       {"converged", r.converged}});
    }
    write_json(dir / "concept_accuracy.json", doc);
    write_text_file(dir / "concept_accuracy.csv", [&](std::ostream& out) {
        out << "concept,method,train_accuracy,test_accuracy,p_value\n";
        for (const auto& r : results) {
            out << csv_escape(r.concept_name) << ',' << method_name(r.kind) << ',' << format_fixed(r.train_accuracy, 4)
                << ',' << format_fixed(r.test_accuracy, 4) << ',' << format_fixed(r.p_value, 4) << '\n';
        }
    });
}

void write_method_comparison(const std::filesystem::path& dir, const MethodAccuracies& accuracies) {
    const ClassifierKind kinds[] = {ClassifierKind::Linear, ClassifierKind::Kernel};
    auto list = [&](const std::string& method, ClassifierKind kind) -> const std::vector<double>* {
        const auto m = accuracies.find(method);
        if (m == accuracies.end()) return nullptr;
        const auto k = m->second.find(kind);
        return k == m->second.end() || k->second.empty() ? nullptr : &k->second;
    };

    ordered_json pairs = ordered_json::array();
    std::string pair_csv = "comparison,cav_z,cav_p,car_z,car_p\n";
    for (auto a = accuracies.begin(); a != accuracies.end(); ++a) {
        for (auto b = std::next(a); b != accuracies.end(); ++b) {
            ordered_json row = {{"method_a", a->first}, {"method_b", b->first}};
            pair_csv += csv_escape(a->first + " x " + b->first);
            for (auto kind : kinds) {
                const auto* la = list(a->first, kind);
                const auto* lb = list(b->first, kind);
                if (la && lb) {
                    const auto r = compare_methods(*la, *lb);
                    row[method_name(kind)] = mwu_json(r);
                    pair_csv += ',' + format_fixed(r.z_score, 4) + ',' + format_fixed(r.p_two_sided, 4);
                } else {
                    pair_csv += ",,";
                }
            }
            pair_csv += '\n';
            pairs.push_back(row);
        }
    }
    write_json(dir / "method_comparison.json", pairs);
    write_text_file(dir / "method_comparison.csv", [&](std::ostream& out) { out << pair_csv; });

    ordered_json summary = ordered_json::array();
    std::string summary_csv = "method,cav_mean,cav_median,cav_std,car_mean,car_median,car_std\n";
    for (const auto& [method, by_kind] : accuracies) {
        ordered_json row = {{"method", method}};
        summary_csv += csv_escape(method);
        for (auto kind : kinds) {
            if (const auto* l = list(method, kind)) {
                const auto s = accuracy_summary(*l);
                row[method_name(kind)] = {{"count", l->size()}, {"mean", s.mean}, {"median", s.median}, {"stddev", s.stddev}};
                summary_csv += ',' + format_fixed(s.mean, 4) + ',' + format_fixed(s.median, 4) + ',' +
                               format_fixed(s.stddev, 4);
            } else {
                summary_csv += ",,,";
            }
        }
        summary_csv += '\n';
        summary.push_back(row);
    }
    write_json(dir / "method_summary.json", summary);
    write_text_file(dir / "method_summary.csv", [&](std::ostream& out) { out << summary_csv; });
}

void write_bins_report(const std::filesystem::path& dir, const std::string& stem,
                       const std::map<std::string, RelevanceBins>& bins) {
    ordered_json doc = ordered_json::array();
    for (const auto& [method, b] : bins)
        doc.push_back({{"method", method}, {"high", b.high}, {"medium", b.medium}, {"low", b.low}});
    write_json(dir / (stem + ".json"), doc);
    write_text_file(dir / (stem + ".csv"), [&](std::ostream& out) {
        out << "method,90-100%,80-89%,<80%\n";
        for (const auto& [method, b] : bins)
            out << csv_escape(method) << ',' << b.high << ',' << b.medium << ',' << b.low << '\n';
    });
}

void write_recovery_report(const std::filesystem::path& dir, const RecoveryReport& report) {
    ordered_json entries = ordered_json::array();
    for (const auto& e : report.entries)
        entries.push_back({{"neuron", e.neuron}, {"planted", e.planted}, {"induced", e.induced}, {"recovered", e.recovered}});
    write_json(dir / "recovery.json", {{"planted", report.planted},
                                       {"recovered", report.recovered},
                                       {"rate", report.rate},
                                       {"neurons", entries}});
}

}  // namespace conlab
