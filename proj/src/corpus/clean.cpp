// SPDX-License-Identifier: Apache-2.0
#include <regex>
#include <unordered_set>

#include "mmkit/common/error.hpp"
#include "mmkit/common/text.hpp"
#include "mmkit/corpus/pipeline.hpp"

namespace mmkit::corpus {

InterleavedDocument clean_document(const InterleavedDocument& doc, const CleanConfig& cfg, CleanStats* stats) {
    std::vector<std::regex> patterns;
    patterns.reserve(cfg.blocklist.size());
    for (const auto& p : cfg.blocklist) {
        try {
            patterns.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw Error(ErrorKind::InvalidArgument, "blocklist pattern '" + p + "': " + e.what());
        }
    }

    CleanStats local;
    std::unordered_set<std::string> seen;
    InterleavedDocument out;
    out.doc_id = doc.doc_id;
    out.source_kind = doc.source_kind;
    out.title = doc.title;

    for (const auto& element : doc.elements) {
        if (std::holds_alternative<ImageRef>(element)) {
            out.elements.push_back(element);
            continue;
        }
        std::string kept;
        for (const auto& line : text::split_lines(std::get<TextRun>(element).text)) {
            const std::string paragraph = text::trim(line);
            if (paragraph.empty()) continue;
            const bool blocked = std::any_of(patterns.begin(), patterns.end(),
                                             [&](const std::regex& re) { return std::regex_search(paragraph, re); });
            if (blocked) {
                ++local.blocked_removed;
                continue;
            }
            if (text::codepoint_count(paragraph) < cfg.min_chars) {
                ++local.short_removed;
                continue;
            }
            if (!seen.insert(text::normalize_for_match(paragraph)).second) {
                ++local.duplicates_removed;
                continue;
            }
            if (!kept.empty()) kept.push_back('\n');
            kept += paragraph;
        }
        append(out.elements, TextRun{std::move(kept)});
    }
    local.empty_result = out.elements.empty();
    if (stats) *stats = local;
    return out;
}

} // namespace mmkit::corpus
