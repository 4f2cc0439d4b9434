#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conlab/ids.hpp"

namespace conlab {

class ClassHierarchy;

/// Lowercases (ASCII), trims, and collapses internal whitespace runs into a
/// single underscore: "Night  Table " -> "night_table".
std::string normalize_tag(std::string_view raw);

/// Unit-cost insert/delete/substitute edit distance.
std::size_t levenshtein(std::string_view a, std::string_view b);

struct TagMatch {
    std::string tag;  // the input tag as given
    ClassId cls;
    std::size_t distance = 0;
};

struct TagMappingReport {
    std::vector<TagMatch> mapped;        // sorted by tag
    std::vector<std::string> unmapped;   // sorted
    std::size_t max_distance_used = 0;
};

/// Maps each tag to the class whose name is closest in edit distance to the
/// normalized tag, provided the distance is at most max_distance. Ties go to
/// the shorter class name, then the lexicographically smaller one. Duplicate
/// input tags are reported once.
TagMappingReport map_tags(std::span<const std::string> tags, const ClassHierarchy& h, std::size_t max_distance = 0);

}  // namespace conlab
