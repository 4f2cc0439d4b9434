#include "conlab/tag_mapping.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "conlab/hierarchy.hpp"

namespace conlab {

std::string normalize_tag(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (unsigned char ch : raw) {
        if (std::isspace(ch)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back('_');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(ch)));
    }
    return out;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t above = row[j];
            row[j] = std::min({above + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = above;
        }
    }
    return row[b.size()];
}

namespace {

// Edit distance if it is at most bound, otherwise bound + 1.
std::size_t bounded_levenshtein(std::string_view a, std::string_view b, std::size_t bound) {
    const std::size_t gap = a.size() > b.size() ? a.size() - b.size() : b.size() - a.size();
    if (gap > bound) return bound + 1;
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        std::size_t best = row[0];
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t above = row[j];
            row[j] = std::min({above + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = above;
            best = std::min(best, row[j]);
        }
        if (best > bound) return bound + 1;
    }
    return std::min(row[b.size()], bound + 1);
}

bool better_candidate(std::size_t d, const std::string& name, std::size_t best_d, const std::string* best) {
    if (best == nullptr || d != best_d) return best == nullptr || d < best_d;
    if (name.size() != best->size()) return name.size() < best->size();
    return name < *best;
}

}  // namespace

TagMappingReport map_tags(std::span<const std::string> tags, const ClassHierarchy& h, std::size_t max_distance) {
    std::vector<std::string> unique(tags.begin(), tags.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    TagMappingReport report;
    report.max_distance_used = max_distance;
    const auto names = h.names();
    for (const auto& tag : unique) {
        const std::string key = normalize_tag(tag);
        if (auto exact = h.find(key)) {
            report.mapped.push_back({tag, *exact, 0});
            continue;
        }
        if (max_distance == 0 || key.empty()) {
            report.unmapped.push_back(tag);
            continue;
        }
        const std::string* best = nullptr;
        std::size_t best_d = 0;
        std::uint32_t best_id = 0;
        for (std::uint32_t c = 0; c < names.size(); ++c) {
            const std::size_t bound = best ? std::min(best_d, max_distance) : max_distance;
            const std::size_t d = bounded_levenshtein(key, names[c], bound);
            if (d > max_distance) continue;
            if (better_candidate(d, names[c], best_d, best)) {
                best = &names[c];
                best_d = d;
                best_id = c;
            }
        }
        if (best)
            report.mapped.push_back({tag, ClassId{best_id}, best_d});
        else
            report.unmapped.push_back(tag);
    }
    return report;
}

}  // namespace conlab
