// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mmkit/common/tokenizer.hpp"
#include "mmkit/common/transport.hpp"
#include "mmkit/corpus/document.hpp"

namespace mmkit::corpus {

inline constexpr std::size_t kDefaultMaxTokens = 2048;
inline constexpr std::size_t kDefaultMaxImages = 10;
inline constexpr double kDefaultTrainFraction = 0.95;

/// Converts already PDF-converted HTML into an interleaved document. All
/// markup is removed except <img>, whose src becomes an ImageRef in reading
/// order. Block-level tags and <br> break paragraphs ("\n"); other
/// whitespace runs collapse to one space. Script, style and comments are
/// dropped. Throws Decode on invalid UTF-8 or an unterminated tag, and
/// EmptyDocument when nothing remains.
InterleavedDocument parse_document(std::string_view html, const std::string& doc_id);

struct CleanConfig {
    std::size_t min_chars = 0;
    std::vector<std::string> blocklist; // ECMAScript regexes, searched per paragraph
};

struct CleanStats {
    std::size_t duplicates_removed = 0;
    std::size_t short_removed = 0;
    std::size_t blocked_removed = 0;
    bool empty_result = false;
};

/// Paragraph-level cleaning (a paragraph is one line of a TextRun).
/// Removes repeated paragraphs by normalized hash, paragraphs shorter than
/// min_chars code points, and paragraphs matching a blocklist pattern.
/// Images are never removed. Idempotent.
InterleavedDocument clean_document(const InterleavedDocument& doc, const CleanConfig& cfg,
                                   CleanStats* stats = nullptr);

/// Greedy packing into segments holding 1..max_images images and at most
/// max_tokens tokens, where each image costs one token. An element that does
/// not fit closes the current segment; a TextRun longer than max_tokens is
/// split. Text not packed with any image is dropped. Documents without images
/// yield no segments.
std::vector<Segment> segment_document(const InterleavedDocument& doc, const Tokenizer& tokenizer,
                                      std::size_t max_tokens = kDefaultMaxTokens,
                                      std::size_t max_images = kDefaultMaxImages);

/// Document-atomic train/validation split. Documents are ordered by a
/// seeded hash of doc_id and assigned to train first-fit until the train
/// segment count reaches round(train_fraction * total). Throws
/// SplitImpossible with fewer than two documents.
CorpusSplit split_corpus(const std::vector<Segment>& segments, double train_fraction, std::uint64_t seed);

// Title classification --------------------------------------------------

/// The closed category vocabulary, verbatim, followed by "Other".
const std::vector<std::string>& title_categories();
inline constexpr std::string_view kOtherCategory = "Other";
bool is_title_category(std::string_view category);

struct TitleCategory {
    std::string title;
    std::string category;
    bool operator==(const TitleCategory&) const = default;
};

class TextClassifierClient {
  public:
    virtual ~TextClassifierClient() = default;
    /// Returns the provider's category string, possibly outside the vocabulary.
    virtual std::string classify(const std::string& title, const std::vector<std::string>& categories) = 0;
};

/// Case-insensitive keyword rules, first match wins; no match → "Other".
class KeywordClassifier final : public TextClassifierClient {
  public:
    KeywordClassifier();
    std::string classify(const std::string& title, const std::vector<std::string>& categories) override;

  private:
    std::vector<std::pair<std::string, std::string>> rules_;
};

/// Speaks {"title","categories"} → {"category"} over a transport.
class RemoteClassifier final : public TextClassifierClient {
  public:
    explicit RemoteClassifier(std::unique_ptr<JsonTransport> transport, std::string path = "/classify");
    ~RemoteClassifier() override;
    std::string classify(const std::string& title, const std::vector<std::string>& categories) override;

  private:
    std::unique_ptr<JsonTransport> transport_;
    std::string path_;
};

std::vector<TitleCategory> classify_titles(const std::vector<std::string>& titles, TextClassifierClient& classifier,
                                           std::size_t* coerced = nullptr);

} // namespace mmkit::corpus
