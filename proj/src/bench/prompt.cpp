// SPDX-License-Identifier: Apache-2.0
#include "mmkit/bench/prompt.hpp"

#include <algorithm>
#include <numeric>

#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/text.hpp"

namespace mmkit::bench {

using nlohmann::json;

PromptTemplate PromptTemplate::from_json(const json& j) {
    PromptTemplate t;
    t.shot = j.value("shot", t.shot);
    t.target = j.value("target", t.target);
    const std::string truncation = j.value("truncation", "drop_trailing");
    if (truncation == "drop_trailing") {
        t.truncation = Truncation::DropTrailing;
    } else if (truncation == "drop_longest") {
        t.truncation = Truncation::DropLongest;
    } else {
        throw Error(ErrorKind::Schema, "template: unknown truncation '" + truncation + "'");
    }
    // Text ahead of the first placeholder would attend to the previous
    // block's image.
    for (const std::string* part : {&t.shot, &t.target}) {
        const std::size_t at = part->find(media::kImagePlaceholder);
        if (at == std::string::npos)
            throw Error(ErrorKind::Schema, "template: shot and target must each contain <image>");
        if (!text::trim(std::string_view(*part).substr(0, at)).empty())
            throw Error(ErrorKind::Schema, "template: each block must start with <image>");
    }
    return t;
}

json PromptTemplate::to_json() const {
    return {{"shot", shot},
            {"target", target},
            {"truncation", truncation == Truncation::DropTrailing ? "drop_trailing" : "drop_longest"}};
}

std::string render_question(const VqaItem& item, bool as_shot) {
    if (as_shot && item.shot_summary) return item.shot_summary->question;
    std::string out;
    if (item.vignette && !item.vignette->empty()) out += *item.vignette;
    for (const auto& lab : item.lab_table) {
        if (!out.empty()) out.push_back('\n');
        out += text::trim(lab.analyte + ": " + lab.value + " " + lab.unit);
    }
    if (!out.empty()) out.push_back('\n');
    out += item.question;
    return out;
}

std::string render_answer(const VqaItem& item, bool as_shot) {
    if (as_shot && item.shot_summary) return item.shot_summary->answer;
    return item.answer;
}

namespace {

void substitute(std::string& s, std::string_view key, const std::string& value) {
    std::string out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t hit = s.find(key, pos);
        if (hit == std::string::npos) break;
        out.append(s, pos, hit - pos);
        out += value;
        pos = hit + key.size();
    }
    out.append(s, pos, std::string::npos);
    s = std::move(out);
}

// Placeholders are split out before {q}/{a} substitution so that an
// "<image>" inside item text stays plain text.
media::TokenStream render_block(const std::string& tmpl, const VqaItem& item, bool as_shot, const Tokenizer& tokenizer) {
    const std::string question = render_question(item, as_shot);
    const std::string answer = render_answer(item, as_shot);
    media::TokenStream stream;
    bool images_emitted = false;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t hit = tmpl.find(media::kImagePlaceholder, pos);
        std::string piece = tmpl.substr(pos, hit == std::string::npos ? std::string::npos : hit - pos);
        substitute(piece, "{q}", question);
        substitute(piece, "{a}", answer);
        for (auto& tok : tokenizer.encode(piece)) stream.tokens.push_back(media::Token::text(tok.id, std::move(tok.surface)));
        if (hit == std::string::npos) break;
        // Every placeholder occurrence after the first is ignored: an item's
        // images are emitted once, together.
        if (!images_emitted) {
            for (std::size_t i = 0; i < item.image_ids.size(); ++i) stream.tokens.push_back(media::Token::image());
            images_emitted = true;
        }
        pos = hit + media::kImagePlaceholder.size();
    }
    return stream;
}

} // namespace

FewShotPrompt assemble_prompt(const VqaItem& target, const std::vector<VqaItem>& shots, const PromptTemplate& tmpl,
                              std::size_t budget_tokens, const Tokenizer& tokenizer) {
    for (const auto& shot : shots) {
        if (shot.split != Split::Train)
            throw Error(ErrorKind::Leakage, "shot " + shot.item_id + " is not from the train split");
        if (shot.item_id == target.item_id)
            throw Error(ErrorKind::Leakage, "target " + target.item_id + " appears among its own shots");
        if (shot.dataset != target.dataset)
            throw Error(ErrorKind::InvalidArgument,
                        "shot " + shot.item_id + " is from dataset " + shot.dataset + ", target from " + target.dataset);
    }

    const media::TokenStream target_block = render_block(tmpl.target, target, false, tokenizer);
    if (target_block.size() > budget_tokens)
        throw Error(ErrorKind::Budget, "target " + target.item_id + " needs " + std::to_string(target_block.size()) +
                                           " tokens, budget is " + std::to_string(budget_tokens));

    std::vector<media::TokenStream> shot_blocks;
    shot_blocks.reserve(shots.size());
    for (const auto& shot : shots) {
        auto block = render_block(tmpl.shot, shot, true, tokenizer);
        block.tokens.push_back(media::Token::end_of_chunk());
        shot_blocks.push_back(std::move(block));
    }

    std::vector<bool> keep(shots.size(), true);
    std::size_t total = target_block.size();
    for (const auto& b : shot_blocks) total += b.size();
    if (tmpl.truncation == Truncation::DropTrailing) {
        for (std::size_t i = shots.size(); i > 0 && total > budget_tokens; --i) {
            keep[i - 1] = false;
            total -= shot_blocks[i - 1].size();
        }
    } else {
        std::vector<std::size_t> order(shots.size());
        std::iota(order.begin(), order.end(), 0);
        // Longest first; among equal lengths the later shot goes first.
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return shot_blocks[a].size() != shot_blocks[b].size() ? shot_blocks[a].size() > shot_blocks[b].size() : a > b;
        });
        for (std::size_t idx : order) {
            if (total <= budget_tokens) break;
            keep[idx] = false;
            total -= shot_blocks[idx].size();
        }
    }

    FewShotPrompt prompt;
    prompt.target_item_id = target.item_id;
    auto add_block = [&](const VqaItem& item, const media::TokenStream& block) {
        PromptBlock info{item.item_id, prompt.stream.size(), 0, prompt.images.size(), item.image_ids.size()};
        prompt.stream.append(block);
        info.end = prompt.stream.size();
        for (std::size_t i = 0; i < item.image_ids.size(); ++i) prompt.images.push_back({item.image_ids[i], item.image_uris[i]});
        prompt.blocks.push_back(std::move(info));
    };
    for (std::size_t i = 0; i < shots.size(); ++i) {
        if (!keep[i]) continue;
        prompt.shot_item_ids.push_back(shots[i].item_id);
        add_block(shots[i], shot_blocks[i]);
    }
    add_block(target, target_block);
    prompt.media = media::assign_media_indices(prompt.stream);
    media::validate(prompt.stream, prompt.images.size());
    return prompt;
}

json to_json(const FewShotPrompt& prompt) {
    json images = json::array();
    for (const auto& img : prompt.images) images.push_back({{"id", img.image_id}, {"uri", img.uri}});
    json blocks = json::array();
    for (const auto& b : prompt.blocks)
        blocks.push_back({{"item_id", b.item_id},
                          {"begin", b.begin},
                          {"end", b.end},
                          {"first_image", b.first_image},
                          {"image_count", b.image_count}});
    return {{"target_item_id", prompt.target_item_id},
            {"shot_item_ids", prompt.shot_item_ids},
            {"stream", media::to_json(prompt.stream)},
            {"images", std::move(images)},
            {"media", media::to_json(prompt.media)},
            {"blocks", std::move(blocks)}};
}

FewShotPrompt prompt_from_json(const json& j) {
    FewShotPrompt p;
    p.target_item_id = io::require_string(j, "target_item_id", "prompt");
    p.shot_item_ids = io::require(j, "shot_item_ids", "prompt").get<std::vector<std::string>>();
    p.stream = media::stream_from_json(io::require(j, "stream", "prompt"));
    for (const auto& img : io::require(j, "images", "prompt"))
        p.images.push_back({io::require_string(img, "id", "prompt image"), io::require_string(img, "uri", "prompt image")});
    p.media = media::media_from_json(io::require(j, "media", "prompt"));
    if (j.contains("blocks")) {
        for (const auto& b : j.at("blocks"))
            p.blocks.push_back({b.at("item_id").get<std::string>(), b.at("begin").get<std::size_t>(),
                                b.at("end").get<std::size_t>(), b.at("first_image").get<std::size_t>(),
                                b.at("image_count").get<std::size_t>()});
    }
    if (p.media != media::assign_media_indices(p.stream))
        throw Error(ErrorKind::Integrity, "prompt " + p.target_item_id + ": media map disagrees with its stream");
    media::validate(p.stream, p.images.size());
    return p;
}

} // namespace mmkit::bench
