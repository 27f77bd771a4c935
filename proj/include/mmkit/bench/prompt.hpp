// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmkit/bench/item.hpp"
#include "mmkit/common/tokenizer.hpp"
#include "mmkit/corpus/document.hpp"
#include "mmkit/media/stream.hpp"

namespace mmkit::bench {

// Splits ---------------------------------------------------------------

struct SplitSpec {
    double image_train_fraction = 0.9;
    double question_train_fraction = 0.9;
    std::uint64_t seed = 0;
};

struct DisjointSplit {
    std::vector<VqaItem> train;
    std::vector<VqaItem> test;
    std::vector<VqaItem> discarded;
};

/// Partitions image ids and normalized question strings independently by
/// seeded hash. An item goes to train when all its images and its question
/// fall in the train partitions, to test when all fall in the test
/// partitions, and is discarded otherwise; no test image or question can
/// then occur in train. Output items carry the assigned split label.
DisjointSplit make_disjoint_split(const std::vector<VqaItem>& items, const SplitSpec& spec);

// Shots ----------------------------------------------------------------

enum class ShotStrategy { FixedRandom };

/// Seeded sample of n items from the pool (sorted by item_id first, so the
/// sample does not depend on input order).
std::vector<VqaItem> select_shots(const std::vector<VqaItem>& train, std::size_t n, std::uint64_t seed,
                                  ShotStrategy strategy = ShotStrategy::FixedRandom);

/// Per-target resampling variant: the seed is mixed with the target id.
std::vector<VqaItem> select_shots_for(const std::vector<VqaItem>& train, std::size_t n, std::uint64_t seed,
                                      const std::string& target_item_id);

// Prompts --------------------------------------------------------------

enum class Truncation { DropTrailing, DropLongest };

/// "<image>" expands to one marker per image of the item; {q} and {a} are
/// the rendered question and answer. Shots are followed by an end-of-chunk
/// token; the target ends at the answer cue.
struct PromptTemplate {
    std::string shot = "<image>Question: {q} Answer: {a}";
    std::string target = "<image>Question: {q} Answer:";
    Truncation truncation = Truncation::DropTrailing;

    static PromptTemplate from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Vignette, then one "analyte: value unit" line per lab, then the question.
/// As a shot, a present shot_summary replaces all of it.
std::string render_question(const VqaItem& item, bool as_shot);
std::string render_answer(const VqaItem& item, bool as_shot);

struct PromptBlock {
    std::string item_id;
    std::size_t begin = 0;  // token range [begin, end)
    std::size_t end = 0;
    std::size_t first_image = 0;
    std::size_t image_count = 0;
};

struct FewShotPrompt {
    std::string target_item_id;
    std::vector<std::string> shot_item_ids;
    media::TokenStream stream;
    std::vector<corpus::ImageRef> images;
    media::MediaIndexMap media;
    std::vector<PromptBlock> blocks;  // shots in order, then the target
};

/// Throws Leakage for a test-split shot or the target among its own shots,
/// InvalidArgument for a shot from another dataset, and Budget when the
/// target alone exceeds budget_tokens. Shots are dropped per the template's
/// truncation policy until the stream fits.
FewShotPrompt assemble_prompt(const VqaItem& target, const std::vector<VqaItem>& shots, const PromptTemplate& tmpl,
                              std::size_t budget_tokens, const Tokenizer& tokenizer);

nlohmann::json to_json(const FewShotPrompt& prompt);
FewShotPrompt prompt_from_json(const nlohmann::json& j);

} // namespace mmkit::bench
