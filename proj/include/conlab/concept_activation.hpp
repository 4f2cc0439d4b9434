#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "conlab/statistics.hpp"

namespace conlab {

class ActivationMatrix;

/// Activation vectors labeled 1 (concept present) or 0 (absent).
struct ConceptDataset {
    std::string concept_name;
    Eigen::MatrixXd rows;    // one activation vector per row
    Eigen::VectorXi labels;  // 0 / 1
};

/// Throws Error::Kind::InvalidArgument unless dimensions agree, labels are 0/1
/// and both labels occur.
void validate(const ConceptDataset& ds);

enum class ClassifierKind { Linear, Kernel };

/// "CAV" for Linear, "CAR" for Kernel.
const char* method_name(ClassifierKind kind);

struct ClassifierConfig {
    double c = 1.0;               // soft-margin regularization
    std::size_t max_epochs = 1000;  // linear solver passes over the data
    double linear_tolerance = 0.1;  // projected-gradient gap at which the linear solver stops
    double tolerance = 1e-3;        // KKT violation at which the kernel solver stops
    double split_fraction = 0.8;
    std::uint64_t rng_seed = 42;
    std::size_t kfold_k = 5;
    std::size_t permutations = 1000;
};

void validate(const ClassifierConfig& cfg);

/// Per-dimension affine map fitted on training rows: x' = (x - shift) / scale.
/// Dimensions constant over the fitted rows map to 0 for every input.
struct Standardizer {
    Eigen::RowVectorXd shift;
    Eigen::RowVectorXd scale;
    std::vector<bool> varying;  // false where the fitted rows are constant

    static Standardizer fit(const Eigen::MatrixXd& rows);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
};

/// Trained maximum-margin classifier in activation space.
struct ConceptClassifier {
    ClassifierKind kind = ClassifierKind::Linear;
    Standardizer standardizer;

    // Linear (CAV): f(x) = weights . x' + bias
    Eigen::VectorXd weights;
    double bias = 0.0;

    // Kernel (CAR): f(x) = sum_i dual_coef_i * exp(-gamma |s_i - x'|^2) + bias
    Eigen::MatrixXd support_rows;  // standardized
    Eigen::VectorXd dual_coef;     // alpha_i * y_i
    double gamma = 0.0;

    bool converged = false;
    std::size_t iterations = 0;
    double train_accuracy = 0.0;
    /// Linear only: dual objective 0.5|w|^2 - sum(alpha) after each pass.
    std::vector<double> objective_trace;

    Eigen::VectorXd decision_function(const Eigen::MatrixXd& rows) const;
    Eigen::VectorXi predict(const Eigen::MatrixXd& rows) const;
};

/// Seeded stratified split; rows keep their original relative order.
std::pair<ConceptDataset, ConceptDataset> split_dataset(const ConceptDataset& ds, const ClassifierConfig& cfg);

/// Hinge-loss linear SVM via dual coordinate descent (bias as an extra
/// constant feature), seeded coordinate order.
ConceptClassifier train_linear(const ConceptDataset& train, const ClassifierConfig& cfg);

/// RBF-kernel SVM via SMO with second-order working-set selection.
/// gamma = 1 / (d * mean per-dimension variance of the standardized rows).
/// Stops at tolerance or after 100 * n iterations (converged = false).
ConceptClassifier train_kernel(const ConceptDataset& train, const ClassifierConfig& cfg);

ConceptClassifier train(ClassifierKind kind, const ConceptDataset& train, const ClassifierConfig& cfg);

/// Fraction of correctly predicted rows.
double evaluate(const ConceptClassifier& model, const ConceptDataset& test);

/// Mean test accuracy over seeded stratified k folds.
double kfold_accuracy(const ConceptDataset& ds, ClassifierKind kind, const ClassifierConfig& cfg);

/// Label-permutation test on the k-fold accuracy:
/// p = (1 + #{null >= observed}) / (1 + permutations).
double kfold_pvalue(const ConceptDataset& ds, ClassifierKind kind, const ClassifierConfig& cfg);

struct AccuracySummary {
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0;  // sample standard deviation
};

AccuracySummary accuracy_summary(std::span<const double> accuracies);

/// Mann-Whitney U on two accuracy lists, oriented so z > 0 when the first
/// list tends to be higher. u_statistic counts pairs where b beats a.
MwuResult compare_methods(std::span<const double> acc_a, std::span<const double> acc_b);

struct ConceptImages {
    std::vector<std::string> positive;
    std::vector<std::string> negative;
};

/// concept -> positive / negative image names.
using ConceptManifest = std::map<std::string, ConceptImages>;

/// Positives are each concept's own images; negatives an equal-sized seeded
/// sample (or all, if fewer) from the other concepts' images.
ConceptManifest sample_negatives(const std::map<std::string, std::vector<std::string>>& image_sets,
                                 std::uint64_t seed);

ConceptDataset make_dataset(const std::string& concept_name, const ActivationMatrix& m, const ConceptImages& images);

struct ConceptResult {
    std::string concept_name;
    ClassifierKind kind = ClassifierKind::Linear;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double p_value = 1.0;
    bool converged = true;
};

/// Split, train, evaluate, and the k-fold permutation p-value.
ConceptResult analyze_concept(const ConceptDataset& ds, ClassifierKind kind, const ClassifierConfig& cfg);

}  // namespace conlab
