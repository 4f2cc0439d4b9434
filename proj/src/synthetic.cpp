#include "conlab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "conlab/error.hpp"
#include "conlab/io.hpp"

namespace conlab {

namespace {

std::string class_name(std::size_t index, int width) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "concept_%0*zu", width, index);
    return buf;
}

// Level boundaries: level l holds ids [starts[l], starts[l + 1]).
std::vector<std::size_t> level_starts(std::size_t class_count, std::size_t depth) {
    // Growth ratio b with 1 + b + ... + b^depth = class_count.
    double lo = 1.0;
    double hi = static_cast<double>(class_count);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        double sum = 0.0;
        double term = 1.0;
        for (std::size_t l = 0; l <= depth; ++l, term *= mid) sum += term;
        (sum < static_cast<double>(class_count) ? lo : hi) = mid;
    }
    std::vector<std::size_t> starts{0, 1};
    double term = 1.0;
    double cumulative = 1.0;
    for (std::size_t l = 1; l <= depth; ++l) {
        term *= lo;
        cumulative += term;
        const auto end = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(cumulative)), starts.back() + 1,
                                                 class_count - (depth - l));
        starts.push_back(l == depth ? class_count : end);
    }
    return starts;
}

}  // namespace

std::vector<ClassHierarchy::NamedEdge> generate_hierarchy_edges(std::size_t class_count, std::size_t depth,
                                                                double extra_parent_rate, std::uint64_t seed) {
    if (depth < 1 || class_count < depth + 1)
        throw Error(Error::Kind::InvalidConfig, "hierarchy needs depth >= 1 and at least depth + 1 classes");
    if (!(extra_parent_rate >= 0.0 && extra_parent_rate <= 1.0))
        throw Error(Error::Kind::InvalidConfig, "extra_parent_rate must lie in [0, 1]");
    const int width = static_cast<int>(std::to_string(class_count - 1).size());
    const auto starts = level_starts(class_count, depth);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution extra(extra_parent_rate);

    std::vector<ClassHierarchy::NamedEdge> edges;
    edges.reserve(static_cast<std::size_t>(static_cast<double>(class_count) * (1.0 + extra_parent_rate)) + 1);
    for (std::size_t l = 1; l <= depth; ++l) {
        std::uniform_int_distribution<std::size_t> prev(starts[l - 1], starts[l] - 1);
        std::uniform_int_distribution<std::size_t> shallower(0, starts[l] - 1);
        for (std::size_t c = starts[l]; c < starts[l + 1]; ++c) {
            const auto child = class_name(c, width);
            const auto parent = prev(rng);
            edges.emplace_back(child, class_name(parent, width));
            if (extra(rng)) {
                const auto second = shallower(rng);
                if (second != parent) edges.emplace_back(child, class_name(second, width));
            }
        }
    }
    return edges;
}

SyntheticBundle generate(const SyntheticConfig& cfg) {
    if (!(cfg.signal > 0.0) || !(cfg.noise_sigma >= 0.0) || !(cfg.distractor_tag_rate >= 0.0) ||
        !(cfg.distractor_tag_rate <= 1.0) || cfg.neurons == 0 || cfg.images == 0)
        throw Error(Error::Kind::InvalidConfig,
                    "synthetic config needs signal > 0, noise_sigma >= 0, distractor rate in [0, 1] and non-empty sizes");

    SyntheticBundle b;
    b.edges = generate_hierarchy_edges(cfg.class_count, cfg.depth, cfg.extra_parent_rate, cfg.rng_seed);
    b.hierarchy = std::make_shared<const ClassHierarchy>(ClassHierarchy::from_edges(b.edges));
    const auto& h = *b.hierarchy;
    std::mt19937_64 rng(cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL);

    // Generated names are zero-padded in creation order, so looking them up by
    // name maps creation index -> ClassId.
    const int width = static_cast<int>(std::to_string(cfg.class_count - 1).size());
    auto by_index = [&](std::size_t i) { return h.id(class_name(i, width)); };

    if (!cfg.planted_map.empty()) {
        for (const auto& [neuron, cls] : cfg.planted_map) {
            if (neuron >= cfg.neurons || cls >= h.class_count())
                throw Error(Error::Kind::InvalidConfig, "planted neuron or class out of range");
            b.ground_truth[neuron] = ClassId{cls};
        }
    } else {
        if (cfg.planted_count > cfg.neurons)
            throw Error(Error::Kind::InvalidConfig, "more planted neurons than neurons");
        const auto starts = level_starts(cfg.class_count, cfg.depth);
        const std::size_t level = cfg.depth - 1;
        std::vector<std::size_t> pool;
        for (std::size_t i = starts[level == 0 ? 1 : level]; i < starts[level == 0 ? 2 : level + 1]; ++i)
            pool.push_back(i);
        if (pool.size() < cfg.planted_count)
            throw Error(Error::Kind::InvalidConfig, "not enough classes to plant " + std::to_string(cfg.planted_count));
        std::shuffle(pool.begin(), pool.end(), rng);
        std::vector<std::size_t> neurons(cfg.neurons);
        for (std::size_t j = 0; j < cfg.neurons; ++j) neurons[j] = j;
        std::shuffle(neurons.begin(), neurons.end(), rng);
        for (std::size_t k = 0; k < cfg.planted_count; ++k) b.ground_truth[neurons[k]] = by_index(pool[k]);
    }

    std::vector<ClassId> planted;
    for (const auto& [neuron, cls] : b.ground_truth) planted.push_back(cls);
    std::sort(planted.begin(), planted.end());
    planted.erase(std::unique(planted.begin(), planted.end()), planted.end());
    if (!planted.empty() && cfg.images < 5 * planted.size())
        throw Error(Error::Kind::InvalidConfig, "need at least 5 images per planted class");
    std::vector<std::vector<ClassId>> subtree;
    for (auto c : planted) subtree.push_back(h.descendants(c));

    std::uniform_int_distribution<std::uint32_t> any_class(0, static_cast<std::uint32_t>(h.class_count() - 1));
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution distractor(cfg.distractor_tag_rate);
    std::bernoulli_distribution restyle(0.2);
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);

    // Tags occasionally appear capitalized with spaces, as in raw annotations.
    auto tag_for = [&](ClassId c) {
        std::string tag = h.name(c);
        if (restyle(rng)) {
            std::replace(tag.begin(), tag.end(), '_', ' ');
            tag[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(tag[0])));
        }
        return tag;
    };

    const int image_width = static_cast<int>(std::to_string(cfg.images - 1).size());
    std::vector<std::size_t> scene(cfg.images);
    for (std::size_t i = 0; i < cfg.images; ++i) scene[i] = planted.empty() ? 0 : i % planted.size();
    std::shuffle(scene.begin(), scene.end(), rng);

    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.images),
                                                   static_cast<Eigen::Index>(cfg.neurons));
    std::vector<std::string> names;
    for (std::size_t i = 0; i < cfg.images; ++i) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "img_%0*zu.jpg", image_width, i);
        names.emplace_back(buf);

        std::vector<ClassId> carried;
        if (!planted.empty()) {
            const auto& options = subtree[scene[i]];
            const ClassId scene_class = coin(rng) ? planted[scene[i]]
                                                  : options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
            carried.push_back(scene_class);
        }
        for (int slot = 0; slot < 3; ++slot) {
            if (distractor(rng)) carried.push_back(ClassId{any_class(rng)});
        }
        std::vector<std::string> tags;
        for (auto c : carried) tags.push_back(tag_for(c));
        b.annotations.emplace_back(names.back(), std::move(tags));

        std::set<ClassId> closure;
        for (auto c : carried) {
            for (auto a : h.ancestors(c)) closure.insert(a);
        }
        for (const auto& [neuron, cls] : b.ground_truth) {
            const double fires = closure.contains(cls) ? cfg.signal : 0.0;
            const double jitter = cfg.noise_sigma > 0.0 ? std::abs(noise(rng)) : 0.0;
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(neuron)) = fires + jitter;
        }
    }
    b.activations = ActivationMatrix(std::move(names), std::move(values));
    return b;
}

void write_bundle(const SyntheticBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "hierarchy.tsv", [&](std::ostream& out) {
        for (const auto& [child, parent] : bundle.edges) out << child << '\t' << parent << '\n';
    });
    write_annotations_json(dir / "annotations.json", bundle.annotations);
    write_activation_csv(dir / "activations.csv", bundle.activations);
    std::map<std::size_t, std::string> truth;
    for (const auto& [neuron, cls] : bundle.ground_truth) truth[neuron] = bundle.hierarchy->name(cls);
    write_ground_truth_json(dir / "ground_truth.json", truth);
}

RecoveryReport recovery(std::span<const NeuronLabelRecord> records, const std::map<std::size_t, ClassId>& ground_truth,
                        const ClassHierarchy& h) {
    RecoveryReport report;
    for (const auto& [neuron, cls] : ground_truth) {
        RecoveryEntry e;
        e.neuron = neuron;
        e.planted = h.name(cls);
        const auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.neuron == neuron; });
        if (it != records.end() && !it->skipped && !it->hypotheses.empty()) {
            const auto& top = it->hypotheses.front().expression;
            e.induced = top.render(h);
            e.recovered = top.size() == 1 && h.is_subclass_of(cls, top.conjuncts().front());
        }
        report.recovered += e.recovered ? 1 : 0;
        report.entries.push_back(std::move(e));
    }
    report.planted = ground_truth.size();
    report.rate = report.planted ? static_cast<double>(report.recovered) / static_cast<double>(report.planted) : 0.0;
    return report;
}

}  // namespace conlab
