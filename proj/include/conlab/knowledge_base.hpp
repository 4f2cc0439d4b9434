#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conlab/hierarchy.hpp"
#include "conlab/ids.hpp"

namespace conlab {

/// Conjunction of one or more hierarchy classes, kept sorted and
/// duplicate-free.
class ClassExpression {
public:
    ClassExpression() = default;
    explicit ClassExpression(ClassId atom) : conjuncts_{atom} {}
    /// Throws Error::Kind::InvalidArgument if conjuncts is empty.
    explicit ClassExpression(std::vector<ClassId> conjuncts);

    std::span<const ClassId> conjuncts() const noexcept { return conjuncts_; }
    std::size_t size() const noexcept { return conjuncts_.size(); }

    /// Conjunct names joined by ", " (the display form used in reports).
    std::string render(const ClassHierarchy& h) const;

    friend bool operator==(const ClassExpression&, const ClassExpression&) = default;
    friend auto operator<=>(const ClassExpression&, const ClassExpression&) = default;

private:
    std::vector<ClassId> conjuncts_;
};

/// Image name paired with its raw object tags.
using ImageAnnotation = std::pair<std::string, std::vector<std::string>>;

/// Images linked to hierarchy classes through their annotated objects.
///
/// An image is an instance of atomic class C iff one of its asserted classes
/// is subsumed by C; a conjunction holds iff every conjunct holds. Each image
/// stores the union of the ancestors of its asserted classes (its "closure"),
/// which turns membership into a binary search.
class KnowledgeBase {
public:
    KnowledgeBase() = default;

    std::shared_ptr<const ClassHierarchy> hierarchy_ptr() const noexcept { return hierarchy_; }
    const ClassHierarchy& hierarchy() const noexcept { return *hierarchy_; }

    std::size_t image_count() const noexcept { return image_names_.size(); }
    const std::string& image_name(ImageId img) const;
    std::optional<ImageId> find_image(std::string_view name) const;
    ImageId image(std::string_view name) const;

    /// Directly asserted classes (mapped object tags), sorted.
    std::span<const ClassId> assertions(ImageId img) const;
    /// Tags of the image that matched no class.
    std::span<const std::string> unmapped_tags(ImageId img) const;
    /// Sorted union of ancestors of all asserted classes.
    std::span<const ClassId> closure(ImageId img) const;

    /// Distinct tags mapped / left unmapped over the whole corpus.
    std::size_t mapped_tag_count() const noexcept { return mapped_tag_count_; }
    std::size_t unmapped_tag_count() const noexcept { return unmapped_tag_count_; }

    bool satisfies(ImageId img, ClassId atom) const;
    bool satisfies(ImageId img, const ClassExpression& e) const;

    /// Images satisfying e, in id order.
    std::vector<ImageId> extension(const ClassExpression& e) const;

    /// Parses the display form produced by ClassExpression::render.
    ClassExpression parse_expression(std::string_view text) const;

private:
    friend KnowledgeBase build_kb(std::shared_ptr<const ClassHierarchy>, std::span<const ImageAnnotation>,
                                  std::size_t);
    void check(ImageId img) const;

    std::shared_ptr<const ClassHierarchy> hierarchy_;
    std::vector<std::string> image_names_;
    std::unordered_map<std::string, std::uint32_t> image_lookup_;
    std::vector<std::vector<ClassId>> assertions_;
    std::vector<std::vector<std::string>> unmapped_;
    std::vector<std::vector<ClassId>> closures_;
    std::size_t mapped_tag_count_ = 0;
    std::size_t unmapped_tag_count_ = 0;
};

/// Normalizes and maps every image's tags onto the hierarchy. Throws
/// Error::Kind::InvalidArgument on duplicate image names.
KnowledgeBase build_kb(std::shared_ptr<const ClassHierarchy> h, std::span<const ImageAnnotation> annotations,
                       std::size_t max_distance = 0);

}  // namespace conlab
