// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cctype>
#include <string>

#include "mmkit/common/error.hpp"
#include "mmkit/common/text.hpp"
#include "mmkit/corpus/pipeline.hpp"

namespace mmkit::corpus {
namespace {

constexpr std::array kBlockTags = {
    "address", "article", "aside",  "blockquote", "body",    "br",     "caption", "dd",     "div",
    "dl",      "dt",      "figcaption", "figure", "footer",  "h1",     "h2",      "h3",     "h4",
    "h5",      "h6",      "header", "hr",         "html",    "li",     "main",    "nav",    "ol",
    "p",       "pre",     "section", "table",     "tbody",   "thead",  "tfoot",   "tr",     "ul",
};

bool is_block(std::string_view name) {
    return std::find(kBlockTags.begin(), kBlockTags.end(), name) != kBlockTags.end();
}

bool ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            continue;
        }
        const std::size_t semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back('&');
            continue;
        }
        const std::string_view name = s.substr(i + 1, semi - i - 1);
        char32_t cp = 0;
        if (!name.empty() && name[0] == '#') {
            try {
                const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
                const std::string digits(name.substr(hex ? 2 : 1));
                if (digits.empty()) throw std::invalid_argument("empty");
                std::size_t used = 0;
                cp = static_cast<char32_t>(std::stoul(digits, &used, hex ? 16 : 10));
                if (used != digits.size() || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff) || cp == 0)
                    cp = 0xfffd;
            } catch (const std::exception&) {
                out.push_back('&');
                continue;
            }
        } else if (name == "amp") {
            cp = '&';
        } else if (name == "lt") {
            cp = '<';
        } else if (name == "gt") {
            cp = '>';
        } else if (name == "quot") {
            cp = '"';
        } else if (name == "apos") {
            cp = '\'';
        } else if (name == "nbsp") {
            cp = ' ';
        } else {
            out.push_back('&');
            continue;
        }
        text::append_utf8(out, cp);
        i = semi;
    }
    return out;
}

struct Tag {
    std::string name;
    bool closing = false;
    std::vector<std::pair<std::string, std::string>> attributes;

    const std::string* attribute(std::string_view key) const {
        for (const auto& [k, v] : attributes)
            if (k == key) return &v;
        return nullptr;
    }
};

class HtmlWalker {
  public:
    HtmlWalker(std::string_view html, const std::string& doc_id) : html_(html), doc_id_(doc_id) {}

    InterleavedDocument run() {
        InterleavedDocument doc;
        doc.doc_id = doc_id_;
        doc.source_kind = SourceKind::Book;
        while (pos_ < html_.size()) {
            const char c = html_[pos_];
            if (c == '<' && starts_markup()) {
                handle_markup(doc);
            } else {
                const std::size_t next = html_.find('<', pos_ + 1);
                const std::size_t end = next == std::string_view::npos ? html_.size() : next;
                add_text(decode_entities(html_.substr(pos_, end - pos_)));
                pos_ = end;
            }
        }
        flush_text(doc);
        if (!title_.empty()) doc.title = text::trim(title_);
        return doc;
    }

  private:
    bool starts_markup() const {
        if (pos_ + 1 >= html_.size()) return false;
        const char n = html_[pos_ + 1];
        return std::isalpha(static_cast<unsigned char>(n)) || n == '/' || n == '!' || n == '?';
    }

    [[noreturn]] void malformed(const std::string& what) const {
        throw Error(ErrorKind::Decode, doc_id_ + ": malformed HTML at byte " + std::to_string(pos_) + ": " + what);
    }

    void handle_markup(InterleavedDocument& doc) {
        if (html_.compare(pos_, 4, "<!--") == 0) {
            const std::size_t end = html_.find("-->", pos_ + 4);
            if (end == std::string_view::npos) malformed("unterminated comment");
            pos_ = end + 3;
            return;
        }
        if (html_[pos_ + 1] == '!' || html_[pos_ + 1] == '?') {
            const std::size_t end = html_.find('>', pos_);
            if (end == std::string_view::npos) malformed("unterminated declaration");
            pos_ = end + 1;
            return;
        }
        const Tag tag = parse_tag();
        if (tag.closing) {
            if (tag.name == "title") in_title_ = false;
            if (is_block(tag.name)) paragraph_break();
            return;
        }
        if (tag.name == "script" || tag.name == "style") {
            skip_raw_text(tag.name);
            return;
        }
        if (tag.name == "title") {
            in_title_ = true;
            return;
        }
        if (tag.name == "img") {
            const std::string* src = tag.attribute("src");
            if (src == nullptr || src->empty()) return;
            flush_text(doc);
            ++image_index_;
            std::string id = doc_id_ + ":img" + std::to_string(image_index_);
            doc.elements.push_back(ImageRef{std::move(id), decode_entities(*src)});
            return;
        }
        if (is_block(tag.name)) {
            paragraph_break();
        } else if (tag.name == "td" || tag.name == "th") {
            pending_space_ = true;
        }
    }

    Tag parse_tag() {
        Tag tag;
        std::size_t i = pos_ + 1;
        if (html_[i] == '/') {
            tag.closing = true;
            ++i;
        }
        const std::size_t name_start = i;
        while (i < html_.size() && (std::isalnum(static_cast<unsigned char>(html_[i])) || html_[i] == '-' ||
                                    html_[i] == ':'))
            ++i;
        tag.name = lower(html_.substr(name_start, i - name_start));
        for (;;) {
            while (i < html_.size() && (ws(html_[i]) || html_[i] == '/')) ++i;
            if (i >= html_.size()) {
                pos_ = i;
                malformed("unterminated <" + tag.name + "> tag");
            }
            if (html_[i] == '>') {
                pos_ = i + 1;
                return tag;
            }
            const std::size_t key_start = i;
            while (i < html_.size() && !ws(html_[i]) && html_[i] != '=' && html_[i] != '>' && html_[i] != '/') ++i;
            std::string key = lower(html_.substr(key_start, i - key_start));
            while (i < html_.size() && ws(html_[i])) ++i;
            std::string value;
            if (i < html_.size() && html_[i] == '=') {
                ++i;
                while (i < html_.size() && ws(html_[i])) ++i;
                if (i < html_.size() && (html_[i] == '"' || html_[i] == '\'')) {
                    const char quote = html_[i];
                    const std::size_t close = html_.find(quote, i + 1);
                    if (close == std::string_view::npos) {
                        pos_ = i;
                        malformed("unterminated attribute value");
                    }
                    value = std::string(html_.substr(i + 1, close - i - 1));
                    i = close + 1;
                } else {
                    const std::size_t vstart = i;
                    while (i < html_.size() && !ws(html_[i]) && html_[i] != '>') ++i;
                    value = std::string(html_.substr(vstart, i - vstart));
                }
            }
            if (!key.empty()) tag.attributes.emplace_back(std::move(key), std::move(value));
        }
    }

    void skip_raw_text(const std::string& name) {
        const std::string lowered = lower(html_.substr(pos_));
        const std::size_t close = lowered.find("</" + name);
        if (close == std::string::npos) malformed("unterminated <" + name + ">");
        const std::size_t end = lowered.find('>', close);
        if (end == std::string::npos) malformed("unterminated </" + name + ">");
        pos_ += end + 1;
    }

    void add_text(const std::string& chunk) {
        if (in_title_) {
            title_ += chunk;
            return;
        }
        for (char c : chunk) {
            if (ws(c)) {
                pending_space_ = true;
                continue;
            }
            if (pending_space_ && !paragraph_.empty()) paragraph_.push_back(' ');
            pending_space_ = false;
            paragraph_.push_back(c);
        }
    }

    void paragraph_break() {
        if (!paragraph_.empty()) paragraphs_.push_back(std::move(paragraph_));
        paragraph_.clear();
        pending_space_ = false;
    }

    void flush_text(InterleavedDocument& doc) {
        paragraph_break();
        if (paragraphs_.empty()) return;
        std::string joined;
        for (std::size_t i = 0; i < paragraphs_.size(); ++i) {
            if (i) joined.push_back('\n');
            joined += paragraphs_[i];
        }
        paragraphs_.clear();
        append(doc.elements, TextRun{std::move(joined)});
    }

    std::string_view html_;
    const std::string& doc_id_;
    std::size_t pos_ = 0;
    std::string paragraph_;
    std::vector<std::string> paragraphs_;
    bool pending_space_ = false;
    bool in_title_ = false;
    std::string title_;
    std::size_t image_index_ = 0;
};

} // namespace

InterleavedDocument parse_document(std::string_view html, const std::string& doc_id) {
    if (!text::is_valid_utf8(html)) throw Error(ErrorKind::Decode, doc_id + ": input is not valid UTF-8");
    InterleavedDocument doc = HtmlWalker(html, doc_id).run();
    if (doc.elements.empty()) throw Error(ErrorKind::EmptyDocument, doc_id + ": no text and no images");
    return doc;
}

} // namespace mmkit::corpus
