#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conlab/ids.hpp"

namespace conlab {

/// Parent/child taxonomy of named classes with a reflexive-transitive
/// subsumption index.
///
/// Class names are normalized with normalize_tag() on construction, so
/// "Night Table" and "night_table" denote the same class. Ids are assigned in
/// order of first appearance in the edge list.
///
/// The closure index combines three labelings computed from depth-first
/// traversals of the child graph:
///  - longest-path depth from the roots (a strict ancestor is always shallower),
///  - a spanning-tree postorder interval that answers tree descendants exactly,
///  - two GRAIL-style reachability intervals that refute most non-ancestors.
/// Queries not settled by the labels fall back to an upward search pruned by
/// the same labels. The object is immutable after construction and all const
/// members are safe to call concurrently.
class ClassHierarchy {
public:
    /// (child, parent) pair of raw class names.
    using NamedEdge = std::pair<std::string, std::string>;

    ClassHierarchy() = default;

    /// Builds the hierarchy and its index. Identical duplicate edges are
    /// ignored. Throws Error::Kind::Cycle naming the classes on a cycle.
    static ClassHierarchy from_edges(std::span<const NamedEdge> edges);

    std::size_t class_count() const noexcept { return names_.size(); }
    std::size_t edge_count() const noexcept { return parent_ids_.size(); }

    const std::string& name(ClassId id) const;
    std::span<const std::string> names() const noexcept { return names_; }

    /// Looks a class up by (normalized) name.
    std::optional<ClassId> find(std::string_view name) const;
    /// As find(), throwing Error::Kind::NotFound for unknown names.
    ClassId id(std::string_view name) const;

    std::span<const ClassId> parents(ClassId id) const;
    std::span<const ClassId> children(ClassId id) const;
    std::uint32_t depth(ClassId id) const;

    /// True iff sup is reachable from sub through parent edges, or sub == sup.
    bool is_subclass_of(ClassId sub, ClassId sup) const;

    /// Reflexive-transitive superclasses of c, sorted by id.
    std::vector<ClassId> ancestors(ClassId c) const;
    /// Reflexive-transitive subclasses of c, sorted by id.
    std::vector<ClassId> descendants(ClassId c) const;

private:
    struct Labels {
        std::uint32_t depth = 0;
        std::uint32_t post1 = 0;       // postorder rank, children ascending
        std::uint32_t tree_low1 = 0;   // first rank of the spanning subtree
        std::uint32_t grail_low1 = 0;  // min rank reachable below
        std::uint32_t post2 = 0;       // postorder rank, children descending
        std::uint32_t grail_low2 = 0;
    };

    void check(ClassId id) const;
    void build_index();
    bool may_reach_down(const Labels& sup, const Labels& sub) const noexcept;

    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> lookup_;
    // CSR adjacency in both directions.
    std::vector<std::uint32_t> parent_offsets_;
    std::vector<ClassId> parent_ids_;
    std::vector<std::uint32_t> child_offsets_;
    std::vector<ClassId> child_ids_;
    std::vector<Labels> labels_;
};

/// Reads "child<TAB>parent" records. Blank lines and lines starting with '#'
/// are skipped; malformed lines raise Error::Kind::Format with the line number.
ClassHierarchy parse_hierarchy(std::istream& in);

/// Writes the edges back in the TSV format, in id order.
void write_hierarchy(std::ostream& out, const ClassHierarchy& h);

}  // namespace conlab
