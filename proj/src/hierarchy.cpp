#include "conlab/hierarchy.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_set>

#include "conlab/error.hpp"
#include "conlab/tag_mapping.hpp"

namespace conlab {

namespace {

constexpr std::uint32_t kUnvisited = std::numeric_limits<std::uint32_t>::max();

// Builds CSR offsets/targets from (source, target) pairs sorted by source.
void build_csr(std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
               std::vector<std::uint32_t>& offsets, std::vector<ClassId>& targets) {
    offsets.assign(n + 1, 0);
    for (const auto& [s, t] : pairs) ++offsets[s + 1];
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    targets.resize(pairs.size());
    std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& [s, t] : pairs) targets[cursor[s]++] = ClassId{t};
}

}  // namespace

ClassHierarchy ClassHierarchy::from_edges(std::span<const NamedEdge> edges) {
    ClassHierarchy h;
    auto intern = [&h](const std::string& raw) {
        std::string key = normalize_tag(raw);
        auto [it, inserted] = h.lookup_.try_emplace(std::move(key), static_cast<std::uint32_t>(h.names_.size()));
        if (inserted) h.names_.push_back(it->first);
        return it->second;
    };

    std::vector<std::pair<std::uint32_t, std::uint32_t>> up;  // child -> parent
    up.reserve(edges.size());
    for (const auto& [child, parent] : edges) {
        const auto c = intern(child);
        const auto p = intern(parent);
        if (c == p) throw Error(Error::Kind::Cycle, "cycle detected: " + h.names_[c] + " -> " + h.names_[c]);
        up.emplace_back(c, p);
    }
    std::sort(up.begin(), up.end());
    up.erase(std::unique(up.begin(), up.end()), up.end());

    const std::size_t n = h.names_.size();
    build_csr(n, up, h.parent_offsets_, h.parent_ids_);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> down;
    down.reserve(up.size());
    for (const auto& [c, p] : up) down.emplace_back(p, c);
    std::sort(down.begin(), down.end());
    build_csr(n, down, h.child_offsets_, h.child_ids_);

    h.build_index();
    return h;
}

void ClassHierarchy::build_index() {
    const std::size_t n = names_.size();
    labels_.assign(n, Labels{});

    // Kahn's algorithm from the roots downward; computes longest-path depth.
    std::vector<std::uint32_t> pending(n);
    std::vector<std::uint32_t> queue;
    queue.reserve(n);
    for (std::uint32_t v = 0; v < n; ++v) {
        pending[v] = parent_offsets_[v + 1] - parent_offsets_[v];
        if (pending[v] == 0) queue.push_back(v);
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto v = queue[head];
        for (auto c : children(ClassId{v})) {
            labels_[c.value].depth = std::max(labels_[c.value].depth, labels_[v].depth + 1);
            if (--pending[c.value] == 0) queue.push_back(c.value);
        }
    }
    if (queue.size() != n) {
        // Walk parents inside the unresolved set until a class repeats.
        std::uint32_t start = 0;
        while (pending[start] == 0) ++start;
        std::vector<std::uint32_t> position(n, kUnvisited);
        std::vector<std::uint32_t> walk;
        std::uint32_t v = start;
        while (position[v] == kUnvisited) {
            position[v] = static_cast<std::uint32_t>(walk.size());
            walk.push_back(v);
            for (auto p : parents(ClassId{v})) {
                if (pending[p.value] != 0) {
                    v = p.value;
                    break;
                }
            }
        }
        std::string message = "cycle detected: ";
        for (std::size_t i = position[v]; i < walk.size(); ++i) message += names_[walk[i]] + " -> ";
        message += names_[v];
        throw Error(Error::Kind::Cycle, message);
    }

    // Two postorder traversals over the child graph. The first also records
    // the spanning-tree interval of every class.
    struct Frame {
        std::uint32_t node;
        std::uint32_t next;
    };
    std::vector<Frame> stack;
    std::vector<std::uint8_t> visited(n, 0);
    for (int pass = 0; pass < 2; ++pass) {
        std::fill(visited.begin(), visited.end(), 0);
        std::uint32_t rank = 0;
        const bool ascending = pass == 0;
        for (std::uint32_t r = 0; r < n; ++r) {
            const std::uint32_t root = ascending ? r : static_cast<std::uint32_t>(n - 1 - r);
            if (parent_offsets_[root + 1] != parent_offsets_[root] || visited[root]) continue;
            visited[root] = 1;
            if (ascending) labels_[root].tree_low1 = rank;
            stack.push_back({root, 0});
            while (!stack.empty()) {
                auto& top = stack.back();
                const auto kids = children(ClassId{top.node});
                if (top.next < kids.size()) {
                    const auto idx = ascending ? top.next : static_cast<std::uint32_t>(kids.size() - 1 - top.next);
                    ++top.next;
                    const auto c = kids[idx].value;
                    if (!visited[c]) {
                        visited[c] = 1;
                        if (ascending) labels_[c].tree_low1 = rank;
                        stack.push_back({c, 0});
                    }
                    continue;
                }
                auto& lab = labels_[top.node];
                std::uint32_t low = rank;
                for (auto c : kids) low = std::min(low, ascending ? labels_[c.value].grail_low1 : labels_[c.value].grail_low2);
                if (ascending) {
                    lab.post1 = rank;
                    lab.grail_low1 = low;
                } else {
                    lab.post2 = rank;
                    lab.grail_low2 = low;
                }
                ++rank;
                stack.pop_back();
            }
        }
    }
}

void ClassHierarchy::check(ClassId id) const {
    if (id.value >= names_.size())
        throw Error(Error::Kind::NotFound, "unknown class id " + std::to_string(id.value));
}

const std::string& ClassHierarchy::name(ClassId id) const {
    check(id);
    return names_[id.value];
}

std::optional<ClassId> ClassHierarchy::find(std::string_view name) const {
    const auto it = lookup_.find(normalize_tag(name));
    if (it == lookup_.end()) return std::nullopt;
    return ClassId{it->second};
}

ClassId ClassHierarchy::id(std::string_view name) const {
    if (auto found = find(name)) return *found;
    throw Error(Error::Kind::NotFound, "unknown class '" + std::string(name) + "'");
}

std::span<const ClassId> ClassHierarchy::parents(ClassId id) const {
    check(id);
    return {parent_ids_.data() + parent_offsets_[id.value], parent_ids_.data() + parent_offsets_[id.value + 1]};
}

std::span<const ClassId> ClassHierarchy::children(ClassId id) const {
    check(id);
    return {child_ids_.data() + child_offsets_[id.value], child_ids_.data() + child_offsets_[id.value + 1]};
}

std::uint32_t ClassHierarchy::depth(ClassId id) const {
    check(id);
    return labels_[id.value].depth;
}

bool ClassHierarchy::may_reach_down(const Labels& sup, const Labels& sub) const noexcept {
    return sup.depth < sub.depth && sup.grail_low1 <= sub.grail_low1 && sub.post1 <= sup.post1 &&
           sup.grail_low2 <= sub.grail_low2 && sub.post2 <= sup.post2;
}

bool ClassHierarchy::is_subclass_of(ClassId sub, ClassId sup) const {
    check(sub);
    check(sup);
    if (sub == sup) return true;
    const Labels& top = labels_[sup.value];
    const Labels& bottom = labels_[sub.value];
    if (!may_reach_down(top, bottom)) return false;
    if (top.tree_low1 <= bottom.post1 && bottom.post1 <= top.post1) return true;

    std::vector<std::uint32_t> stack{sub.value};
    std::unordered_set<std::uint32_t> seen{sub.value};
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (auto p : parents(ClassId{v})) {
            if (p == sup) return true;
            const Labels& lab = labels_[p.value];
            if (!may_reach_down(top, lab) || !seen.insert(p.value).second) continue;
            if (top.tree_low1 <= lab.post1 && lab.post1 <= top.post1) return true;
            stack.push_back(p.value);
        }
    }
    return false;
}

namespace {

template <typename Next>
std::vector<ClassId> closure(ClassId start, Next next) {
    std::vector<ClassId> out{start};
    std::unordered_set<std::uint32_t> seen{start.value};
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (auto c : next(out[i])) {
            if (seen.insert(c.value).second) out.push_back(c);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<ClassId> ClassHierarchy::ancestors(ClassId c) const {
    check(c);
    return closure(c, [this](ClassId v) { return parents(v); });
}

std::vector<ClassId> ClassHierarchy::descendants(ClassId c) const {
    check(c);
    return closure(c, [this](ClassId v) { return children(v); });
}

ClassHierarchy parse_hierarchy(std::istream& in) {
    std::vector<ClassHierarchy::NamedEdge> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw Error(Error::Kind::Format,
                        "hierarchy line " + std::to_string(line_no) + ": expected 'child<TAB>parent'");
        std::string child = line.substr(0, tab);
        std::string parent = line.substr(tab + 1);
        if (normalize_tag(child).empty() || normalize_tag(parent).empty())
            throw Error(Error::Kind::Format, "hierarchy line " + std::to_string(line_no) + ": empty class name");
        edges.emplace_back(std::move(child), std::move(parent));
    }
    if (in.bad()) throw Error(Error::Kind::Io, "failed reading hierarchy stream");
    return ClassHierarchy::from_edges(edges);
}

void write_hierarchy(std::ostream& out, const ClassHierarchy& h) {
    for (std::uint32_t c = 0; c < h.class_count(); ++c) {
        for (auto p : h.parents(ClassId{c})) out << h.name(ClassId{c}) << '\t' << h.name(p) << '\n';
    }
}

}  // namespace conlab
