#pragma once

#include <compare>
#include <cstdint>
#include <functional>

namespace conlab {

/// Dense handle of a class in a ClassHierarchy.
struct ClassId {
    std::uint32_t value = 0;

    friend constexpr auto operator<=>(ClassId, ClassId) = default;
};

/// Dense handle of an image (individual) in a KnowledgeBase.
struct ImageId {
    std::uint32_t value = 0;

    friend constexpr auto operator<=>(ImageId, ImageId) = default;
};

}  // namespace conlab

template <>
struct std::hash<conlab::ClassId> {
    std::size_t operator()(conlab::ClassId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};

template <>
struct std::hash<conlab::ImageId> {
    std::size_t operator()(conlab::ImageId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
