// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace mmkit::corpus {

struct TextRun {
    std::string text;
    bool operator==(const TextRun&) const = default;
};

struct ImageRef {
    std::string image_id;
    std::string uri;
    bool operator==(const ImageRef&) const = default;
};

using Element = std::variant<TextRun, ImageRef>;

enum class SourceKind { Book, Paired };

/// Ordered text runs and image references of one source document.
/// Construction through `append` keeps adjacent text runs merged.
struct InterleavedDocument {
    std::string doc_id;
    SourceKind source_kind = SourceKind::Book;
    std::vector<Element> elements;
    std::optional<std::string> title;

    std::size_t image_count() const;
    bool operator==(const InterleavedDocument&) const = default;
};

/// Appends, merging into a trailing TextRun with `separator` when both are text.
void append(std::vector<Element>& elements, Element element, std::string_view separator = "\n");

/// Throws when two ImageRefs share an id or two TextRuns are adjacent.
void check_invariants(const InterleavedDocument& doc);

struct Segment {
    std::string segment_id;
    std::string doc_id;
    std::vector<Element> elements;
    std::size_t token_count = 0;
    std::size_t image_count = 0;
    bool operator==(const Segment&) const = default;
};

struct CorpusSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::uint64_t seed = 0;
    double train_fraction = 0.95;
    bool operator==(const CorpusSplit&) const = default;
};

nlohmann::json to_json(const Element& element);
Element element_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InterleavedDocument& doc);
InterleavedDocument document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Segment& segment);
Segment segment_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorpusSplit& split);
CorpusSplit split_from_json(const nlohmann::json& j);

} // namespace mmkit::corpus
