// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "mmkit/common/error.hpp"
#include "mmkit/common/hash.hpp"
#include "mmkit/corpus/pipeline.hpp"

namespace mmkit::corpus {
namespace {

class SegmentBuilder {
  public:
    SegmentBuilder(const InterleavedDocument& doc, const Tokenizer& tokenizer, std::size_t max_tokens,
                   std::size_t max_images)
        : doc_(doc), tokenizer_(tokenizer), max_tokens_(max_tokens), max_images_(max_images) {}

    std::vector<Segment> run() {
        for (const auto& element : doc_.elements) {
            if (const auto* img = std::get_if<ImageRef>(&element)) {
                add_image(*img);
            } else {
                add_text(std::get<TextRun>(element).text);
            }
        }
        flush();
        return std::move(segments_);
    }

  private:
    void add_image(const ImageRef& img) {
        if (images_ == max_images_) flush();
        if (tokens_ + 1 > max_tokens_) {
            if (images_ > 0) {
                flush();
            } else {
                keep_last_text(max_tokens_ - 1);
            }
        }
        current_.push_back(img);
        ++tokens_;
        ++images_;
    }

    void add_text(std::string text) {
        for (;;) {
            const std::size_t n = tokenizer_.count(text);
            if (n == 0) return;
            if (tokens_ + n <= max_tokens_) {
                push_text(std::move(text), n);
                return;
            }
            if (images_ == 0) {
                // Imageless stretch: merge forward, retaining only the tail
                // that could still share a segment with the next image.
                push_text(std::move(text), n);
                keep_last_text(max_tokens_);
                return;
            }
            if (n > max_tokens_) {
                const std::size_t room = max_tokens_ - tokens_;
                if (room > 0) {
                    auto [head, tail] = tokenizer_.split_at(text, room);
                    push_text(std::move(head), room);
                    text = std::move(tail);
                }
            }
            flush();
        }
    }

    void push_text(std::string text, std::size_t n) {
        if (!current_.empty()) {
            if (auto* last = std::get_if<TextRun>(&current_.back())) {
                last->text += "\n";
                last->text += text;
                tokens_ += n;
                return;
            }
        }
        current_.push_back(TextRun{std::move(text)});
        tokens_ += n;
    }

    // Only called while the pending segment holds no image, so it is at most
    // one TextRun.
    void keep_last_text(std::size_t n) {
        if (current_.empty()) return;
        auto& run = std::get<TextRun>(current_.back());
        run.text = tokenizer_.keep_last(run.text, n);
        tokens_ = tokenizer_.count(run.text);
        if (tokens_ == 0) current_.clear();
    }

    void flush() {
        if (images_ > 0) {
            char suffix[16];
            std::snprintf(suffix, sizeof suffix, "#%04zu", segments_.size());
            segments_.push_back(Segment{doc_.doc_id + suffix, doc_.doc_id, std::move(current_), tokens_, images_});
        }
        current_.clear();
        tokens_ = 0;
        images_ = 0;
    }

    const InterleavedDocument& doc_;
    const Tokenizer& tokenizer_;
    std::size_t max_tokens_;
    std::size_t max_images_;
    std::vector<Segment> segments_;
    std::vector<Element> current_;
    std::size_t tokens_ = 0;
    std::size_t images_ = 0;
};

} // namespace

std::vector<Segment> segment_document(const InterleavedDocument& doc, const Tokenizer& tokenizer,
                                      std::size_t max_tokens, std::size_t max_images) {
    if (max_tokens < 1) throw Error(ErrorKind::InvalidArgument, "max_tokens must be >= 1");
    if (max_images < 1) throw Error(ErrorKind::InvalidArgument, "max_images must be >= 1");
    if (doc.image_count() == 0) return {};
    return SegmentBuilder(doc, tokenizer, max_tokens, max_images).run();
}

CorpusSplit split_corpus(const std::vector<Segment>& segments, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error(ErrorKind::InvalidArgument, "train_fraction must lie in (0, 1)");

    std::unordered_map<std::string, std::size_t> per_doc;
    for (const auto& s : segments) ++per_doc[s.doc_id];
    if (per_doc.size() < 2)
        throw Error(ErrorKind::SplitImpossible, "split needs at least 2 documents, got " + std::to_string(per_doc.size()));

    struct Doc {
        std::uint64_t key;
        const std::string* id;
        std::size_t segments;
    };
    std::vector<Doc> docs;
    docs.reserve(per_doc.size());
    for (const auto& [id, n] : per_doc) docs.push_back({hash::keyed(id, seed), &id, n});
    std::sort(docs.begin(), docs.end(), [](const Doc& a, const Doc& b) {
        return a.key != b.key ? a.key < b.key : *a.id < *b.id;
    });

    const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(segments.size())));
    std::unordered_map<std::string_view, bool> in_train;
    std::size_t train_count = 0;
    for (const auto& d : docs) {
        const bool fits = train_count + d.segments <= target;
        in_train[*d.id] = fits;
        if (fits) train_count += d.segments;
    }
    // Both sides stay non-empty.
    if (train_count == 0) {
        in_train[*docs.front().id] = true;
    } else if (train_count == segments.size()) {
        in_train[*docs.back().id] = false;
    }

    CorpusSplit split;
    split.seed = seed;
    split.train_fraction = train_fraction;
    for (const auto& s : segments) (in_train[s.doc_id] ? split.train : split.validation).push_back(s.segment_id);
    return split;
}

} // namespace mmkit::corpus
