// SPDX-License-Identifier: Apache-2.0
#include "mmkit/bench/item.hpp"

#include <set>

#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/text.hpp"

namespace mmkit::bench {

using nlohmann::json;

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw Error(ErrorKind::Schema, "unknown split '" + std::string(s) + "'");
}

std::string_view to_string(DatasetFormat format) {
    return format == DatasetFormat::VqaJsonl ? "vqa_jsonl" : "usmle_jsonl";
}

DatasetFormat format_from_string(std::string_view s) {
    if (s == "vqa_jsonl" || s == "vqa") return DatasetFormat::VqaJsonl;
    if (s == "usmle_jsonl" || s == "usmle") return DatasetFormat::UsmleJsonl;
    throw Error(ErrorKind::InvalidArgument, "unknown dataset format '" + std::string(s) + "'");
}

std::size_t default_shot_count(DatasetFormat format) { return format == DatasetFormat::UsmleJsonl ? 4 : 6; }

json to_json(const VqaItem& item) {
    json j = {{"item_id", item.item_id},   {"dataset", item.dataset},   {"image_ids", item.image_ids},
              {"image_uris", item.image_uris}, {"question", item.question}, {"answer", item.answer},
              {"split", to_string(item.split)}};
    if (item.vignette) j["vignette"] = *item.vignette;
    if (!item.lab_table.empty()) {
        json labs = json::array();
        for (const auto& l : item.lab_table) labs.push_back({{"analyte", l.analyte}, {"value", l.value}, {"unit", l.unit}});
        j["lab_table"] = std::move(labs);
    }
    if (item.shot_summary)
        j["shot_summary"] = {{"question", item.shot_summary->question}, {"answer", item.shot_summary->answer}};
    return j;
}

VqaItem item_from_json(const json& j, DatasetFormat format) {
    VqaItem item;
    item.item_id = io::require_string(j, "item_id", "item");
    const std::string ctx = "item " + item.item_id;
    item.dataset = io::require_string(j, "dataset", ctx);
    const json& ids = io::require(j, "image_ids", ctx);
    if (!ids.is_array() || ids.empty()) throw Error(ErrorKind::Schema, ctx + ": image_ids must be a non-empty array");
    for (const auto& id : ids) {
        if (!id.is_string()) throw Error(ErrorKind::Schema, ctx + ": image_ids entries must be strings");
        item.image_ids.push_back(id.get<std::string>());
    }
    if (j.contains("image_uris")) {
        item.image_uris = j.at("image_uris").get<std::vector<std::string>>();
        if (item.image_uris.size() != item.image_ids.size())
            throw Error(ErrorKind::Schema, ctx + ": image_uris must parallel image_ids");
    } else {
        item.image_uris = item.image_ids;
    }
    item.question = io::require_string(j, "question", ctx);
    item.answer = io::require_string(j, "answer", ctx);
    if (text::trim(item.answer).empty()) throw Error(ErrorKind::Schema, ctx + ": answer must be non-empty");
    item.split = split_from_string(j.value("split", "test"));

    const bool has_usmle_fields = j.contains("vignette") || j.contains("lab_table") || j.contains("shot_summary");
    if (has_usmle_fields && format == DatasetFormat::VqaJsonl)
        throw Error(ErrorKind::Schema, ctx + ": vignette/lab_table/shot_summary require usmle_jsonl");
    if (j.contains("vignette")) item.vignette = j.at("vignette").get<std::string>();
    if (j.contains("lab_table")) {
        for (const auto& l : j.at("lab_table")) {
            item.lab_table.push_back({io::require_string(l, "analyte", ctx + " lab"), io::require_string(l, "value", ctx + " lab"),
                                      l.value("unit", "")});
        }
    }
    if (j.contains("shot_summary")) {
        const json& s = j.at("shot_summary");
        item.shot_summary = ShotSummary{io::require_string(s, "question", ctx + " shot_summary"),
                                        io::require_string(s, "answer", ctx + " shot_summary")};
    }
    return item;
}

std::vector<VqaItem> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    std::vector<VqaItem> items;
    std::set<std::string> ids;
    io::for_each_jsonl(path, [&](std::size_t line, const json& record) {
        VqaItem item;
        try {
            item = item_from_json(record, format);
        } catch (const Error& e) {
            throw Error(e.kind(), path.string() + ":" + std::to_string(line) + ": " + e.what());
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Schema, path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
        if (!ids.insert(item.item_id).second)
            throw Error(ErrorKind::DuplicateId,
                        path.string() + ":" + std::to_string(line) + ": duplicate item_id '" + item.item_id + "'");
        items.push_back(std::move(item));
    });
    return items;
}

void save_dataset(const std::filesystem::path& path, const std::vector<VqaItem>& items) {
    std::vector<json> records;
    records.reserve(items.size());
    for (const auto& item : items) records.push_back(to_json(item));
    io::write_jsonl_atomic(path, records);
}

} // namespace mmkit::bench
