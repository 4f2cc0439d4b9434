#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conlab/concept_activation.hpp"
#include "conlab/hierarchy.hpp"
#include "conlab/knowledge_base.hpp"
#include "conlab/neuron_analysis.hpp"

namespace conlab {

/// Shortest decimal string that parses back to exactly v.
std::string format_double(double v);
/// Fixed-point with the given number of decimals.
std::string format_fixed(double v, int decimals);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);
/// Splits one CSV record, honoring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

/// Writes through a temporary sibling file and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);
std::string read_text_file(const std::filesystem::path& path);

ClassHierarchy read_hierarchy_file(const std::filesystem::path& path);

/// {"image name": ["tag", ...], ...}; image order follows the file.
std::vector<ImageAnnotation> parse_annotations_json(std::string_view text);
std::vector<ImageAnnotation> read_annotations_json(const std::filesystem::path& path);
void write_annotations_json(const std::filesystem::path& path, const std::vector<ImageAnnotation>& annotations);

/// Header "image,<neuron_0>,...,<neuron_k-1>", then one row per image.
ActivationMatrix parse_activation_csv(std::istream& in);
ActivationMatrix read_activation_csv(const std::filesystem::path& path);
void write_activation_csv(std::ostream& out, const ActivationMatrix& m);
void write_activation_csv(const std::filesystem::path& path, const ActivationMatrix& m);

/// Rows "neuron,label" with an optional "neuron,label" header. Several neurons
/// may share a label; a neuron may appear only once. With neuron_count set,
/// ids at or above it are rejected.
std::vector<NeuronLabel> parse_labels_csv(std::istream& in, std::optional<std::size_t> neuron_count = std::nullopt);
std::vector<NeuronLabel> read_labels_csv(const std::filesystem::path& path,
                                         std::optional<std::size_t> neuron_count = std::nullopt);
void write_labels_csv(const std::filesystem::path& path, const std::vector<NeuronLabel>& labels);

/// {"label": ["image", ...], ...}
ImageSetManifest parse_manifest_json(std::string_view text);
ImageSetManifest read_manifest_json(const std::filesystem::path& path);
void write_manifest_json(const std::filesystem::path& path, const ImageSetManifest& manifest);

/// {"concept": {"positive": [...], "negative": [...]}, ...}
ConceptManifest parse_concept_manifest_json(std::string_view text);
ConceptManifest read_concept_manifest_json(const std::filesystem::path& path);
void write_concept_manifest_json(const std::filesystem::path& path, const ConceptManifest& manifest);

/// {"<neuron>": "<class name>", ...}
std::map<std::size_t, std::string> read_ground_truth_json(const std::filesystem::path& path);
void write_ground_truth_json(const std::filesystem::path& path, const std::map<std::size_t, std::string>& truth);

/// One image name per line; blank lines and '#' comments skipped.
std::vector<std::string> read_image_list(const std::filesystem::path& path);

}  // namespace conlab
