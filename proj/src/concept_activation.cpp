#include "conlab/concept_activation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "conlab/error.hpp"
#include "conlab/neuron_analysis.hpp"
#include "conlab/parallel.hpp"

namespace conlab {

void validate(const ConceptDataset& ds) {
    if (ds.rows.rows() != ds.labels.size())
        throw Error(Error::Kind::InvalidArgument, "concept dataset '" + ds.concept_name + "': row/label count mismatch");
    Eigen::Index ones = 0;
    for (Eigen::Index i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels(i) != 0 && ds.labels(i) != 1)
            throw Error(Error::Kind::InvalidArgument, "concept dataset '" + ds.concept_name + "': labels must be 0/1");
        ones += ds.labels(i);
    }
    if (ones == 0 || ones == ds.labels.size())
        throw Error(Error::Kind::InvalidArgument, "concept dataset '" + ds.concept_name + "' has a single label");
    if (!ds.rows.allFinite())
        throw Error(Error::Kind::InvalidArgument, "concept dataset '" + ds.concept_name + "' has non-finite values");
}

const char* method_name(ClassifierKind kind) { return kind == ClassifierKind::Linear ? "CAV" : "CAR"; }

void validate(const ClassifierConfig& cfg) {
    if (!(cfg.c > 0.0) || cfg.max_epochs < 1 || !(cfg.tolerance > 0.0) || !(cfg.linear_tolerance > 0.0) ||
        !(cfg.split_fraction > 0.0) || !(cfg.split_fraction < 1.0) || cfg.kfold_k < 2)
        throw Error(Error::Kind::InvalidConfig,
                    "classifier config needs C > 0, epochs >= 1, tolerances > 0, 0 < split < 1 and k >= 2");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& rows) {
    Standardizer s;
    const auto n = static_cast<double>(rows.rows());
    s.shift = rows.colwise().mean();
    const Eigen::RowVectorXd var = (rows.rowwise() - s.shift).array().square().colwise().sum() / n;
    s.scale = var.unaryExpr([](double v) { return v > 1e-24 ? std::sqrt(v) : 1.0; });
    s.varying.resize(static_cast<std::size_t>(var.size()));
    for (Eigen::Index c = 0; c < var.size(); ++c) s.varying[static_cast<std::size_t>(c)] = var(c) > 1e-24;
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& rows) const {
    Eigen::MatrixXd out = (rows.rowwise() - shift).array().rowwise() / scale.array();
    for (std::size_t c = 0; c < varying.size(); ++c) {
        if (!varying[c]) out.col(static_cast<Eigen::Index>(c)).setZero();
    }
    return out;
}

namespace {

Eigen::VectorXd signed_labels(const Eigen::VectorXi& labels) {
    return labels.cast<double>().array() * 2.0 - 1.0;
}

// exp(-gamma |a_i - b_j|^2) for every row pair.
Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
    const Eigen::VectorXd na = a.rowwise().squaredNorm();
    const Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd d = -2.0 * a * b.transpose();
    d.colwise() += na;
    d.rowwise() += nb.transpose();
    return (-gamma * d.array().max(0.0)).exp().matrix();
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

// Columns with non-zero spread in the standardized training rows. The rest
// are identically zero and contribute nothing to dot products or distances.
std::vector<Eigen::Index> active_columns(const Standardizer& s) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index c = 0; c < s.scale.size(); ++c) {
        if (s.varying[static_cast<std::size_t>(c)]) cols.push_back(c);
    }
    return cols;
}

ConceptDataset take_rows(const ConceptDataset& ds, const std::vector<Eigen::Index>& idx) {
    ConceptDataset out;
    out.concept_name = ds.concept_name;
    out.rows.resize(static_cast<Eigen::Index>(idx.size()), ds.rows.cols());
    out.labels.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.rows.row(static_cast<Eigen::Index>(i)) = ds.rows.row(idx[i]);
        out.labels(static_cast<Eigen::Index>(i)) = ds.labels(idx[i]);
    }
    return out;
}

// Row indices of each label after a seeded shuffle.
std::array<std::vector<Eigen::Index>, 2> shuffled_by_label(const ConceptDataset& ds, std::mt19937_64& rng) {
    std::array<std::vector<Eigen::Index>, 2> by_label;
    for (Eigen::Index i = 0; i < ds.labels.size(); ++i) by_label[static_cast<std::size_t>(ds.labels(i))].push_back(i);
    for (auto& v : by_label) std::shuffle(v.begin(), v.end(), rng);
    return by_label;
}

}  // namespace

Eigen::VectorXd ConceptClassifier::decision_function(const Eigen::MatrixXd& rows) const {
    const Eigen::MatrixXd x = standardizer.apply(rows);
    if (kind == ClassifierKind::Linear) {
        if (x.cols() != weights.size())
            throw Error(Error::Kind::InvalidArgument, "input dimension does not match the classifier");
        return (x * weights).array() + bias;
    }
    if (x.cols() != support_rows.cols())
        throw Error(Error::Kind::InvalidArgument, "input dimension does not match the classifier");
    return (rbf_kernel(x, support_rows, gamma) * dual_coef).array() + bias;
}

Eigen::VectorXi ConceptClassifier::predict(const Eigen::MatrixXd& rows) const {
    return (decision_function(rows).array() > 0.0).cast<int>();
}

std::pair<ConceptDataset, ConceptDataset> split_dataset(const ConceptDataset& ds, const ClassifierConfig& cfg) {
    validate(ds);
    validate(cfg);
    auto rng = make_rng(cfg.rng_seed);
    auto by_label = shuffled_by_label(ds, rng);
    std::vector<Eigen::Index> train_idx;
    std::vector<Eigen::Index> test_idx;
    for (const auto& rows : by_label) {
        if (rows.size() < 2)
            throw Error(Error::Kind::InvalidArgument,
                        "concept dataset '" + ds.concept_name + "': a label has fewer than 2 rows to split");
        const auto n = static_cast<double>(rows.size());
        const auto n_train = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(cfg.split_fraction * n)), 1,
                                                     rows.size() - 1);
        train_idx.insert(train_idx.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_idx.insert(test_idx.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {take_rows(ds, train_idx), take_rows(ds, test_idx)};
}

ConceptClassifier train_linear(const ConceptDataset& train, const ClassifierConfig& cfg) {
    validate(train);
    validate(cfg);
    ConceptClassifier model;
    model.kind = ClassifierKind::Linear;
    model.standardizer = Standardizer::fit(train.rows);
    const Eigen::MatrixXd x = model.standardizer.apply(train.rows);
    const Eigen::VectorXd y = signed_labels(train.labels);
    const Eigen::Index n = x.rows();
    const auto cols = active_columns(model.standardizer);
    const auto d = static_cast<Eigen::Index>(cols.size());

    // Augmented weight vector: last coordinate is the bias.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    const Eigen::MatrixXd xt = x(Eigen::all, cols).transpose();  // one contiguous column per sample
    const Eigen::VectorXd q_diag = xt.colwise().squaredNorm().transpose().array() + 1.0;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto rng = make_rng(cfg.rng_seed);

    // Coordinates stuck at a bound are shrunk away (as in liblinear) and
    // restored for a final full pass once the active set has converged.
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::size_t active = order.size();
    double pg_max_old = inf;
    double pg_min_old = -inf;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(active), rng);
        double pg_max = -inf;
        double pg_min = inf;
        for (std::size_t s = 0; s < active;) {
            const auto i = order[s];
            const double g = y(i) * (xt.col(i).dot(w.head(d)) + w(d)) - 1.0;
            double pg = g;
            if (alpha(i) == 0.0) {
                if (g > pg_max_old) {
                    std::swap(order[s], order[--active]);
                    continue;
                }
                pg = std::min(g, 0.0);
            } else if (alpha(i) == cfg.c) {
                if (g < pg_min_old) {
                    std::swap(order[s], order[--active]);
                    continue;
                }
                pg = std::max(g, 0.0);
            }
            ++s;
            pg_max = std::max(pg_max, pg);
            pg_min = std::min(pg_min, pg);
            if (pg == 0.0) continue;
            const double old = alpha(i);
            alpha(i) = std::clamp(old - g / q_diag(i), 0.0, cfg.c);
            const double step = (alpha(i) - old) * y(i);
            w.head(d) += step * xt.col(i);
            w(d) += step;
        }
        model.objective_trace.push_back(0.5 * w.squaredNorm() - alpha.sum());
        model.iterations = epoch + 1;
        if (pg_max - pg_min < cfg.linear_tolerance) {
            if (active == order.size()) {
                model.converged = true;
                break;
            }
            active = order.size();
            pg_max_old = inf;
            pg_min_old = -inf;
            continue;
        }
        pg_max_old = pg_max > 0.0 ? pg_max : inf;
        pg_min_old = pg_min < 0.0 ? pg_min : -inf;
    }
    model.weights = Eigen::VectorXd::Zero(x.cols());
    for (Eigen::Index k = 0; k < d; ++k) model.weights(cols[static_cast<std::size_t>(k)]) = w(k);
    model.bias = w(d);
    model.train_accuracy = evaluate(model, train);
    return model;
}

ConceptClassifier train_kernel(const ConceptDataset& train, const ClassifierConfig& cfg) {
    validate(train);
    validate(cfg);
    ConceptClassifier model;
    model.kind = ClassifierKind::Kernel;
    model.standardizer = Standardizer::fit(train.rows);
    const Eigen::MatrixXd x = model.standardizer.apply(train.rows);
    const Eigen::VectorXd y = signed_labels(train.labels);
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();

    const double mean_var = d > 0 ? x.array().square().colwise().mean().mean() : 0.0;
    model.gamma = d > 0 && mean_var > 0.0 ? 1.0 / (static_cast<double>(d) * mean_var) : 1.0;
    const auto cols = active_columns(model.standardizer);
    const Eigen::MatrixXd x_active = x(Eigen::all, cols);
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    k.selfadjointView<Eigen::Lower>().rankUpdate(x_active);
    const Eigen::VectorXd sq = k.diagonal();
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            k(i, j) = std::exp(-model.gamma * std::max(0.0, sq(i) + sq(j) - 2.0 * k(i, j)));
            k(j, i) = k(i, j);
        }
    }

    const double c = cfg.c;
    constexpr double tau = 1e-12;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // Q alpha - e
    auto in_up = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) < c) || (y(t) < 0 && alpha(t) > 0); };
    auto in_low = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < c); };

    const std::size_t budget = 100 * static_cast<std::size_t>(n);
    std::size_t iter = 0;
    for (; iter < budget; ++iter) {
        Eigen::Index i = -1;
        double g_max = -std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            if (in_up(t) && -y(t) * grad(t) >= g_max) {
                if (-y(t) * grad(t) > g_max || i < 0) i = t;
                g_max = -y(t) * grad(t);
            }
        }
        Eigen::Index j = -1;
        double g_min = std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            g_min = std::min(g_min, -y(t) * grad(t));
            if (i < 0) continue;
            const double b = g_max + y(t) * grad(t);
            if (b <= 0.0) continue;
            double a = k(i, i) + k(t, t) - 2.0 * k(i, t);
            if (a <= 0.0) a = tau;
            if (-(b * b) / a < best) {
                best = -(b * b) / a;
                j = t;
            }
        }
        if (i < 0 || j < 0 || g_max - g_min < cfg.tolerance) {
            model.converged = true;
            break;
        }

        // Two-variable subproblem (same update rules as LIBSVM).
        const double old_ai = alpha(i);
        const double old_aj = alpha(j);
        double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if (quad <= 0.0) quad = tau;
        if (y(i) != y(j)) {
            const double delta = (-grad(i) - grad(j)) / quad;
            const double diff = alpha(i) - alpha(j);
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0 && alpha(j) < 0) {
                alpha(j) = 0;
                alpha(i) = diff;
            } else if (diff <= 0 && alpha(i) < 0) {
                alpha(i) = 0;
                alpha(j) = -diff;
            }
            if (diff > 0 && alpha(i) > c) {
                alpha(i) = c;
                alpha(j) = c - diff;
            } else if (diff <= 0 && alpha(j) > c) {
                alpha(j) = c;
                alpha(i) = c + diff;
            }
        } else {
            const double delta = (grad(i) - grad(j)) / quad;
            const double sum = alpha(i) + alpha(j);
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > c && alpha(i) > c) {
                alpha(i) = c;
                alpha(j) = sum - c;
            } else if (sum <= c && alpha(j) < 0) {
                alpha(j) = 0;
                alpha(i) = sum;
            }
            if (sum > c && alpha(j) > c) {
                alpha(j) = c;
                alpha(i) = sum - c;
            } else if (sum <= c && alpha(i) < 0) {
                alpha(i) = 0;
                alpha(j) = sum;
            }
        }
        const double di = alpha(i) - old_ai;
        const double dj = alpha(j) - old_aj;
        grad.array() += (y.array() * (y(i) * di * k.col(i).array() + y(j) * dj * k.col(j).array()));
    }
    model.iterations = iter;

    // Offset from free vectors, or the midpoint of the feasible interval.
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y(t) * grad(t);
        if (alpha(t) > 0 && alpha(t) < c) {
            free_sum += yg;
            ++free_count;
        } else if ((alpha(t) >= c && y(t) < 0) || (alpha(t) <= 0 && y(t) > 0)) {
            ub = std::min(ub, yg);
        } else {
            lb = std::max(lb, yg);
        }
    }
    const double rho = free_count ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);

    std::vector<Eigen::Index> support;
    for (Eigen::Index t = 0; t < n; ++t) {
        if (alpha(t) > 0) support.push_back(t);
    }
    model.support_rows.resize(static_cast<Eigen::Index>(support.size()), d);
    model.dual_coef.resize(static_cast<Eigen::Index>(support.size()));
    for (std::size_t s = 0; s < support.size(); ++s) {
        model.support_rows.row(static_cast<Eigen::Index>(s)) = x.row(support[s]);
        model.dual_coef(static_cast<Eigen::Index>(s)) = alpha(support[s]) * y(support[s]);
    }
    model.bias = -rho;
    const Eigen::VectorXd f = (k * (alpha.array() * y.array()).matrix()).array() - rho;
    model.train_accuracy = static_cast<double>(((f.array() > 0.0).cast<int>() == train.labels.array()).count()) /
                           static_cast<double>(n);
    return model;
}

ConceptClassifier train(ClassifierKind kind, const ConceptDataset& train_set, const ClassifierConfig& cfg) {
    return kind == ClassifierKind::Linear ? train_linear(train_set, cfg) : train_kernel(train_set, cfg);
}

double evaluate(const ConceptClassifier& model, const ConceptDataset& test) {
    if (test.rows.rows() == 0) throw Error(Error::Kind::InvalidArgument, "evaluation on an empty test set");
    if (test.rows.rows() != test.labels.size())
        throw Error(Error::Kind::InvalidArgument, "test set row/label count mismatch");
    const Eigen::VectorXi predicted = model.predict(test.rows);
    return static_cast<double>((predicted.array() == test.labels.array()).count()) /
           static_cast<double>(test.labels.size());
}

namespace {

double kfold_accuracy_seeded(const ConceptDataset& ds, ClassifierKind kind, const ClassifierConfig& cfg,
                             std::mt19937_64& rng) {
    const auto by_label = shuffled_by_label(ds, rng);
    for (const auto& rows : by_label) {
        if (rows.size() < cfg.kfold_k)
            throw Error(Error::Kind::InvalidArgument, "concept dataset '" + ds.concept_name + "': a label has fewer rows than folds");
    }
    std::vector<std::size_t> fold(static_cast<std::size_t>(ds.labels.size()));
    for (const auto& rows : by_label) {
        for (std::size_t p = 0; p < rows.size(); ++p) fold[static_cast<std::size_t>(rows[p])] = p % cfg.kfold_k;
    }
    double total = 0.0;
    for (std::size_t f = 0; f < cfg.kfold_k; ++f) {
        std::vector<Eigen::Index> train_idx;
        std::vector<Eigen::Index> test_idx;
        for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test_idx : train_idx).push_back(static_cast<Eigen::Index>(i));
        const auto model = train(kind, take_rows(ds, train_idx), cfg);
        total += evaluate(model, take_rows(ds, test_idx));
    }
    return total / static_cast<double>(cfg.kfold_k);
}

}  // namespace

double kfold_accuracy(const ConceptDataset& ds, ClassifierKind kind, const ClassifierConfig& cfg) {
    validate(ds);
    validate(cfg);
    auto rng = make_rng(cfg.rng_seed);
    return kfold_accuracy_seeded(ds, kind, cfg, rng);
}

double kfold_pvalue(const ConceptDataset& ds, ClassifierKind kind, const ClassifierConfig& cfg) {
    if (cfg.permutations == 0) throw Error(Error::Kind::InvalidConfig, "permutation test needs at least 1 permutation");
    const double observed = kfold_accuracy(ds, kind, cfg);
    std::vector<double> null(cfg.permutations);
    parallel_for(cfg.permutations, [&](std::size_t p) {
        auto rng = make_rng(cfg.rng_seed, p + 1);
        ConceptDataset permuted = ds;
        std::shuffle(permuted.labels.begin(), permuted.labels.end(), rng);
        null[p] = kfold_accuracy_seeded(permuted, kind, cfg, rng);
    });
    const auto extreme = std::count_if(null.begin(), null.end(), [&](double v) { return v >= observed; });
    return static_cast<double>(1 + extreme) / static_cast<double>(1 + cfg.permutations);
}

AccuracySummary accuracy_summary(std::span<const double> accuracies) {
    const auto s = summarize(accuracies, 0.0);
    return {s.mean, s.median, sample_stddev(accuracies)};
}

MwuResult compare_methods(std::span<const double> acc_a, std::span<const double> acc_b) {
    return mann_whitney_u(acc_b, acc_a);
}

ConceptManifest sample_negatives(const std::map<std::string, std::vector<std::string>>& image_sets,
                                 std::uint64_t seed) {
    ConceptManifest out;
    std::uint64_t stream = 0;
    for (const auto& [concept_name, images] : image_sets) {
        std::set<std::string> own(images.begin(), images.end());
        std::set<std::string> pool;
        for (const auto& [other, other_images] : image_sets) {
            if (other == concept_name) continue;
            for (const auto& img : other_images) {
                if (!own.contains(img)) pool.insert(img);
            }
        }
        std::vector<std::string> candidates(pool.begin(), pool.end());
        auto rng = make_rng(seed, ++stream);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        if (candidates.size() > own.size()) candidates.resize(own.size());
        std::sort(candidates.begin(), candidates.end());
        out[concept_name] = {std::vector<std::string>(own.begin(), own.end()), std::move(candidates)};
    }
    return out;
}

ConceptDataset make_dataset(const std::string& concept_name, const ActivationMatrix& m, const ConceptImages& images) {
    ConceptDataset ds;
    ds.concept_name = concept_name;
    const auto n = static_cast<Eigen::Index>(images.positive.size() + images.negative.size());
    ds.rows.resize(n, static_cast<Eigen::Index>(m.neuron_count()));
    ds.labels.resize(n);
    Eigen::Index r = 0;
    for (const auto* list : {&images.positive, &images.negative}) {
        for (const auto& img : *list) {
            ds.rows.row(r) = m.values().row(static_cast<Eigen::Index>(m.row(img)));
            ds.labels(r) = list == &images.positive ? 1 : 0;
            ++r;
        }
    }
    return ds;
}

ConceptResult analyze_concept(const ConceptDataset& ds, ClassifierKind kind, const ClassifierConfig& cfg) {
    const auto [train_set, test_set] = split_dataset(ds, cfg);
    const auto model = train(kind, train_set, cfg);
    ConceptResult r;
    r.concept_name = ds.concept_name;
    r.kind = kind;
    r.train_accuracy = model.train_accuracy;
    r.test_accuracy = evaluate(model, test_set);
    r.p_value = kfold_pvalue(ds, kind, cfg);
    r.converged = model.converged;
    return r;
}

}  // namespace conlab
