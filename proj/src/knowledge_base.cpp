#include "conlab/knowledge_base.hpp"

#include <algorithm>
#include <map>

#include "conlab/error.hpp"
#include "conlab/tag_mapping.hpp"

namespace conlab {

ClassExpression::ClassExpression(std::vector<ClassId> conjuncts) : conjuncts_(std::move(conjuncts)) {
    if (conjuncts_.empty()) throw Error(Error::Kind::InvalidArgument, "class expression needs at least one conjunct");
    std::sort(conjuncts_.begin(), conjuncts_.end());
    conjuncts_.erase(std::unique(conjuncts_.begin(), conjuncts_.end()), conjuncts_.end());
}

std::string ClassExpression::render(const ClassHierarchy& h) const {
    std::string out;
    for (std::size_t i = 0; i < conjuncts_.size(); ++i) {
        if (i) out += ", ";
        out += h.name(conjuncts_[i]);
    }
    return out;
}

void KnowledgeBase::check(ImageId img) const {
    if (img.value >= image_names_.size())
        throw Error(Error::Kind::NotFound, "unknown image id " + std::to_string(img.value));
}

const std::string& KnowledgeBase::image_name(ImageId img) const {
    check(img);
    return image_names_[img.value];
}

std::optional<ImageId> KnowledgeBase::find_image(std::string_view name) const {
    const auto it = image_lookup_.find(std::string(name));
    if (it == image_lookup_.end()) return std::nullopt;
    return ImageId{it->second};
}

ImageId KnowledgeBase::image(std::string_view name) const {
    if (auto found = find_image(name)) return *found;
    throw Error(Error::Kind::NotFound, "unknown image '" + std::string(name) + "'");
}

std::span<const ClassId> KnowledgeBase::assertions(ImageId img) const {
    check(img);
    return assertions_[img.value];
}

std::span<const std::string> KnowledgeBase::unmapped_tags(ImageId img) const {
    check(img);
    return unmapped_[img.value];
}

std::span<const ClassId> KnowledgeBase::closure(ImageId img) const {
    check(img);
    return closures_[img.value];
}

bool KnowledgeBase::satisfies(ImageId img, ClassId atom) const {
    check(img);
    if (atom.value >= hierarchy_->class_count())
        throw Error(Error::Kind::NotFound, "unknown class id " + std::to_string(atom.value));
    const auto& c = closures_[img.value];
    return std::binary_search(c.begin(), c.end(), atom);
}

bool KnowledgeBase::satisfies(ImageId img, const ClassExpression& e) const {
    return std::all_of(e.conjuncts().begin(), e.conjuncts().end(),
                       [&](ClassId atom) { return satisfies(img, atom); });
}

std::vector<ImageId> KnowledgeBase::extension(const ClassExpression& e) const {
    std::vector<ImageId> out;
    for (std::uint32_t i = 0; i < image_names_.size(); ++i) {
        if (satisfies(ImageId{i}, e)) out.push_back(ImageId{i});
    }
    return out;
}

ClassExpression KnowledgeBase::parse_expression(std::string_view text) const {
    // Whole-string lookup first so class names containing ", " still resolve.
    if (auto whole = hierarchy_->find(text)) return ClassExpression(*whole);
    std::vector<ClassId> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        parts.push_back(hierarchy_->id(piece));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return ClassExpression(std::move(parts));
}

KnowledgeBase build_kb(std::shared_ptr<const ClassHierarchy> h, std::span<const ImageAnnotation> annotations,
                       std::size_t max_distance) {
    if (!h) throw Error(Error::Kind::InvalidArgument, "knowledge base needs a hierarchy");
    KnowledgeBase kb;
    kb.hierarchy_ = std::move(h);

    // Map each distinct tag once; the mapping is independent per tag.
    std::vector<std::string> all_tags;
    for (const auto& [name, tags] : annotations) all_tags.insert(all_tags.end(), tags.begin(), tags.end());
    const auto report = map_tags(all_tags, *kb.hierarchy_, max_distance);
    std::map<std::string, ClassId, std::less<>> mapping;
    for (const auto& m : report.mapped) mapping.emplace(m.tag, m.cls);
    kb.mapped_tag_count_ = report.mapped.size();
    kb.unmapped_tag_count_ = report.unmapped.size();

    std::unordered_map<std::uint32_t, std::vector<ClassId>> ancestor_cache;
    for (const auto& [name, tags] : annotations) {
        const auto id = static_cast<std::uint32_t>(kb.image_names_.size());
        if (!kb.image_lookup_.emplace(name, id).second)
            throw Error(Error::Kind::InvalidArgument, "duplicate image name '" + name + "'");
        kb.image_names_.push_back(name);

        std::vector<ClassId> asserted;
        std::vector<std::string> unmapped;
        for (const auto& tag : tags) {
            if (auto it = mapping.find(tag); it != mapping.end())
                asserted.push_back(it->second);
            else
                unmapped.push_back(tag);
        }
        std::sort(asserted.begin(), asserted.end());
        asserted.erase(std::unique(asserted.begin(), asserted.end()), asserted.end());

        std::vector<ClassId> closure;
        for (auto c : asserted) {
            auto [it, fresh] = ancestor_cache.try_emplace(c.value);
            if (fresh) it->second = kb.hierarchy_->ancestors(c);
            closure.insert(closure.end(), it->second.begin(), it->second.end());
        }
        std::sort(closure.begin(), closure.end());
        closure.erase(std::unique(closure.begin(), closure.end()), closure.end());

        kb.assertions_.push_back(std::move(asserted));
        kb.unmapped_.push_back(std::move(unmapped));
        kb.closures_.push_back(std::move(closure));
    }
    return kb;
}

}  // namespace conlab
