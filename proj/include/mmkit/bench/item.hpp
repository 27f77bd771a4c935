// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mmkit::bench {

enum class Split { Train, Test };

enum class DatasetFormat { VqaJsonl, UsmleJsonl };

struct LabValue {
    std::string analyte;
    std::string value;
    std::string unit;
    bool operator==(const LabValue&) const = default;
};

/// Short form of an item used when it appears as a shot.
struct ShotSummary {
    std::string question;
    std::string answer;
    bool operator==(const ShotSummary&) const = default;
};

struct VqaItem {
    std::string item_id;
    std::string dataset;
    std::vector<std::string> image_ids;
    std::vector<std::string> image_uris;  // parallel to image_ids
    std::string question;
    std::string answer;
    std::optional<std::string> vignette;
    std::vector<LabValue> lab_table;
    Split split = Split::Test;
    std::optional<ShotSummary> shot_summary;

    bool operator==(const VqaItem&) const = default;
};

std::string_view to_string(Split split);
Split split_from_string(std::string_view s);
std::string_view to_string(DatasetFormat format);
DatasetFormat format_from_string(std::string_view s);

/// Default shot count per dataset family: 4 for the long USMLE-style
/// problems, 6 otherwise.
std::size_t default_shot_count(DatasetFormat format);

nlohmann::json to_json(const VqaItem& item);

/// Parses one record; usmle-only fields are rejected for vqa_jsonl.
VqaItem item_from_json(const nlohmann::json& j, DatasetFormat format);

/// Reads a dataset file. Errors name the offending line; duplicate
/// item_ids are rejected.
std::vector<VqaItem> load_dataset(const std::filesystem::path& path, DatasetFormat format);

void save_dataset(const std::filesystem::path& path, const std::vector<VqaItem>& items);

} // namespace mmkit::bench
