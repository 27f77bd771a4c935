// SPDX-License-Identifier: Apache-2.0
#include "mmkit/corpus/document.hpp"

#include <set>

#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"

namespace mmkit::corpus {

using nlohmann::json;

std::size_t InterleavedDocument::image_count() const {
    std::size_t n = 0;
    for (const auto& e : elements) n += std::holds_alternative<ImageRef>(e);
    return n;
}

void append(std::vector<Element>& elements, Element element, std::string_view separator) {
    if (auto* incoming = std::get_if<TextRun>(&element)) {
        if (incoming->text.empty()) return;
        if (!elements.empty()) {
            if (auto* last = std::get_if<TextRun>(&elements.back())) {
                if (!last->text.empty()) last->text += separator;
                last->text += incoming->text;
                return;
            }
        }
    }
    elements.push_back(std::move(element));
}

void check_invariants(const InterleavedDocument& doc) {
    std::set<std::string> ids;
    bool previous_text = false;
    for (const auto& e : doc.elements) {
        if (const auto* img = std::get_if<ImageRef>(&e)) {
            if (!ids.insert(img->image_id).second)
                throw Error(ErrorKind::DuplicateId, doc.doc_id + ": duplicate image id " + img->image_id);
            previous_text = false;
        } else {
            if (previous_text) throw Error(ErrorKind::Validation, doc.doc_id + ": adjacent text runs");
            previous_text = true;
        }
    }
}

json to_json(const Element& element) {
    if (const auto* t = std::get_if<TextRun>(&element)) return {{"t", "text"}, {"v", t->text}};
    const auto& img = std::get<ImageRef>(element);
    return {{"t", "image"}, {"id", img.image_id}, {"uri", img.uri}};
}

Element element_from_json(const json& j) {
    const std::string kind = io::require_string(j, "t", "element");
    if (kind == "text") return TextRun{io::require_string(j, "v", "text element")};
    if (kind == "image") {
        ImageRef img{io::require_string(j, "id", "image element"), ""};
        img.uri = j.contains("uri") ? j.at("uri").get<std::string>() : img.image_id;
        return img;
    }
    throw Error(ErrorKind::Schema, "element: unknown kind '" + kind + "'");
}

json to_json(const InterleavedDocument& doc) {
    json elements = json::array();
    for (const auto& e : doc.elements) elements.push_back(to_json(e));
    json j = {{"doc_id", doc.doc_id},
              {"source_kind", doc.source_kind == SourceKind::Book ? "book" : "paired"},
              {"elements", std::move(elements)}};
    if (doc.title) j["title"] = *doc.title;
    return j;
}

InterleavedDocument document_from_json(const json& j) {
    InterleavedDocument doc;
    doc.doc_id = io::require_string(j, "doc_id", "document");
    const std::string kind = j.value("source_kind", "book");
    if (kind == "book") {
        doc.source_kind = SourceKind::Book;
    } else if (kind == "paired") {
        doc.source_kind = SourceKind::Paired;
    } else {
        throw Error(ErrorKind::Schema, doc.doc_id + ": unknown source_kind '" + kind + "'");
    }
    const json& elements = io::require(j, "elements", "document");
    if (!elements.is_array()) throw Error(ErrorKind::Schema, doc.doc_id + ": elements must be an array");
    for (const auto& e : elements) append(doc.elements, element_from_json(e));
    if (j.contains("title") && j.at("title").is_string()) doc.title = j.at("title").get<std::string>();
    check_invariants(doc);
    return doc;
}

json to_json(const Segment& segment) {
    json elements = json::array();
    for (const auto& e : segment.elements) elements.push_back(to_json(e));
    return {{"segment_id", segment.segment_id},
            {"doc_id", segment.doc_id},
            {"elements", std::move(elements)},
            {"token_count", segment.token_count},
            {"image_count", segment.image_count}};
}

Segment segment_from_json(const json& j) {
    Segment s;
    s.segment_id = io::require_string(j, "segment_id", "segment");
    s.doc_id = io::require_string(j, "doc_id", "segment");
    for (const auto& e : io::require(j, "elements", "segment")) s.elements.push_back(element_from_json(e));
    s.token_count = io::require(j, "token_count", "segment").get<std::size_t>();
    s.image_count = io::require(j, "image_count", "segment").get<std::size_t>();
    return s;
}

json to_json(const CorpusSplit& split) {
    return {{"train", split.train},
            {"validation", split.validation},
            {"seed", split.seed},
            {"train_fraction", split.train_fraction}};
}

CorpusSplit split_from_json(const json& j) {
    CorpusSplit s;
    s.train = io::require(j, "train", "split").get<std::vector<std::string>>();
    s.validation = io::require(j, "validation", "split").get<std::vector<std::string>>();
    s.seed = io::require(j, "seed", "split").get<std::uint64_t>();
    s.train_fraction = io::require(j, "train_fraction", "split").get<double>();
    return s;
}

} // namespace mmkit::corpus
