#include "conlab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "conlab/error.hpp"
#include "json.hpp"

namespace conlab {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted) throw Error(Error::Kind::Format, "unterminated quoted CSV field");
    return fields;
}

void write_text_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Error::Kind::Io, "cannot write " + tmp.string());
        body(out);
        out.flush();
        if (!out) throw Error(Error::Kind::Io, "failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(Error::Kind::Io, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Error::Kind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ClassHierarchy read_hierarchy_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Error::Kind::Io, "cannot open " + path.string());
    return parse_hierarchy(in);
}

namespace {

ordered_json parse_json(std::string_view text, const char* what) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Error::Kind::Format, std::string(what) + ": " + e.what());
    }
}

std::vector<std::string> string_array(const ordered_json& value, const std::string& context) {
    if (!value.is_array()) throw Error(Error::Kind::Format, context + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& item : value) {
        if (!item.is_string()) throw Error(Error::Kind::Format, context + ": expected an array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

void write_json(const std::filesystem::path& path, const ordered_json& doc) {
    write_text_file(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

}  // namespace

std::vector<ImageAnnotation> parse_annotations_json(std::string_view text) {
    const auto doc = parse_json(text, "annotations");
    if (!doc.is_object()) throw Error(Error::Kind::Format, "annotations: expected an object of image -> tags");
    std::vector<ImageAnnotation> out;
    for (const auto& [image, tags] : doc.items()) out.emplace_back(image, string_array(tags, "annotations[" + image + "]"));
    return out;
}

std::vector<ImageAnnotation> read_annotations_json(const std::filesystem::path& path) {
    return parse_annotations_json(read_text_file(path));
}

void write_annotations_json(const std::filesystem::path& path, const std::vector<ImageAnnotation>& annotations) {
    ordered_json doc = ordered_json::object();
    for (const auto& [image, tags] : annotations) doc[image] = tags;
    write_json(path, doc);
}

ActivationMatrix parse_activation_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(Error::Kind::Format, "activation CSV: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.empty() || header.front() != "image")
        throw Error(Error::Kind::Format, "activation CSV: header must start with 'image'");
    const std::size_t neurons = header.size() - 1;

    std::vector<std::string> names;
    std::vector<double> flat;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != neurons + 1)
            throw Error(Error::Kind::Format, "activation CSV line " + std::to_string(line_no) + ": expected " +
                                                 std::to_string(neurons + 1) + " fields, got " +
                                                 std::to_string(fields.size()));
        names.push_back(fields[0]);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            const auto& f = fields[j];
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || !std::isfinite(v) || v < 0.0)
                throw Error(Error::Kind::Format, "activation CSV line " + std::to_string(line_no) + " (image '" +
                                                     fields[0] + "'), column " + std::to_string(j - 1) +
                                                     ": expected a finite non-negative number, got '" + f + "'");
            flat.push_back(v);
        }
    }
    Eigen::MatrixXd values(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(neurons));
    for (std::size_t r = 0; r < names.size(); ++r) {
        for (std::size_t j = 0; j < neurons; ++j)
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = flat[r * neurons + j];
    }
    return ActivationMatrix(std::move(names), std::move(values));
}

ActivationMatrix read_activation_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Error::Kind::Io, "cannot open " + path.string());
    return parse_activation_csv(in);
}

void write_activation_csv(std::ostream& out, const ActivationMatrix& m) {
    out << "image";
    for (std::size_t j = 0; j < m.neuron_count(); ++j) out << ",n" << j;
    out << '\n';
    for (std::size_t r = 0; r < m.image_count(); ++r) {
        out << csv_escape(m.image_names()[r]);
        for (std::size_t j = 0; j < m.neuron_count(); ++j) out << ',' << format_double(m.value(r, j));
        out << '\n';
    }
}

void write_activation_csv(const std::filesystem::path& path, const ActivationMatrix& m) {
    write_text_file(path, [&](std::ostream& out) { write_activation_csv(out, m); });
}

std::vector<NeuronLabel> parse_labels_csv(std::istream& in, std::optional<std::size_t> neuron_count) {
    std::vector<NeuronLabel> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (line_no == 1 && fields.size() == 2 && fields[0] == "neuron" && fields[1] == "label") continue;
        if (fields.size() != 2)
            throw Error(Error::Kind::Format, "labels CSV line " + std::to_string(line_no) + ": expected 'neuron,label'");
        std::size_t neuron = 0;
        const auto& f = fields[0];
        const auto res = std::from_chars(f.data(), f.data() + f.size(), neuron);
        if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || f.empty())
            throw Error(Error::Kind::Format,
                        "labels CSV line " + std::to_string(line_no) + ": neuron id '" + f + "' is not an integer");
        if (neuron_count && neuron >= *neuron_count)
            throw Error(Error::Kind::Format, "labels CSV line " + std::to_string(line_no) + ": neuron " +
                                                 std::to_string(neuron) + " out of range");
        for (const auto& l : out) {
            if (l.neuron == neuron)
                throw Error(Error::Kind::Format, "labels CSV line " + std::to_string(line_no) + ": neuron " +
                                                     std::to_string(neuron) + " listed twice");
        }
        out.push_back({neuron, fields[1]});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.neuron < b.neuron; });
    return out;
}

std::vector<NeuronLabel> read_labels_csv(const std::filesystem::path& path, std::optional<std::size_t> neuron_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Error::Kind::Io, "cannot open " + path.string());
    return parse_labels_csv(in, neuron_count);
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<NeuronLabel>& labels) {
    write_text_file(path, [&](std::ostream& out) {
        out << "neuron,label\n";
        for (const auto& l : labels) out << l.neuron << ',' << csv_escape(l.label) << '\n';
    });
}

ImageSetManifest parse_manifest_json(std::string_view text) {
    const auto doc = parse_json(text, "image-set manifest");
    if (!doc.is_object()) throw Error(Error::Kind::Format, "image-set manifest: expected an object of label -> images");
    ImageSetManifest out;
    for (const auto& [label, images] : doc.items()) out[label] = string_array(images, "manifest[" + label + "]");
    return out;
}

ImageSetManifest read_manifest_json(const std::filesystem::path& path) {
    return parse_manifest_json(read_text_file(path));
}

void write_manifest_json(const std::filesystem::path& path, const ImageSetManifest& manifest) {
    ordered_json doc = ordered_json::object();
    for (const auto& [label, images] : manifest) doc[label] = images;
    write_json(path, doc);
}

ConceptManifest parse_concept_manifest_json(std::string_view text) {
    const auto doc = parse_json(text, "concept manifest");
    if (!doc.is_object()) throw Error(Error::Kind::Format, "concept manifest: expected an object");
    ConceptManifest out;
    for (const auto& [concept_name, entry] : doc.items()) {
        if (!entry.is_object() || !entry.contains("positive") || !entry.contains("negative"))
            throw Error(Error::Kind::Format, "concept manifest[" + concept_name + "]: needs 'positive' and 'negative'");
        out[concept_name] = {string_array(entry["positive"], "concept manifest[" + concept_name + "].positive"),
                             string_array(entry["negative"], "concept manifest[" + concept_name + "].negative")};
    }
    return out;
}

ConceptManifest read_concept_manifest_json(const std::filesystem::path& path) {
    return parse_concept_manifest_json(read_text_file(path));
}

void write_concept_manifest_json(const std::filesystem::path& path, const ConceptManifest& manifest) {
    ordered_json doc = ordered_json::object();
    for (const auto& [concept_name, images] : manifest)
        doc[concept_name] = {{"positive", images.positive}, {"negative", images.negative}};
    write_json(path, doc);
}

std::map<std::size_t, std::string> read_ground_truth_json(const std::filesystem::path& path) {
    const auto doc = parse_json(read_text_file(path), "ground truth");
    if (!doc.is_object()) throw Error(Error::Kind::Format, "ground truth: expected an object");
    std::map<std::size_t, std::string> out;
    for (const auto& [key, value] : doc.items()) {
        std::size_t neuron = 0;
        const auto res = std::from_chars(key.data(), key.data() + key.size(), neuron);
        if (res.ec != std::errc{} || res.ptr != key.data() + key.size() || !value.is_string())
            throw Error(Error::Kind::Format, "ground truth: expected \"<neuron>\": \"<class>\" entries");
        out[neuron] = value.get<std::string>();
    }
    return out;
}

void write_ground_truth_json(const std::filesystem::path& path, const std::map<std::size_t, std::string>& truth) {
    ordered_json doc = ordered_json::object();
    for (const auto& [neuron, name] : truth) doc[std::to_string(neuron)] = name;
    write_json(path, doc);
}

std::vector<std::string> read_image_list(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        out.push_back(line);
    }
    return out;
}

}  // namespace conlab
