// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mmkit::io {

using Json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Calls `on_record(line_number, record)` for each non-blank line. A parse
/// failure raises a Schema error naming the line. When `tolerate_torn_tail`
/// is set, an unparseable final line without a trailing newline is skipped
/// (it is the signature of an interrupted append).
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const Json&)>& on_record,
                    bool tolerate_torn_tail = false);

std::vector<Json> read_jsonl(const std::filesystem::path& path);

void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<Json>& records);

Json read_json(const std::filesystem::path& path);

void write_json_atomic(const std::filesystem::path& path, const Json& value, int indent = 2);

/// Wrapper around nlohmann::json::at that raises a Schema error naming the
/// field instead of a json exception.
const Json& require(const Json& object, std::string_view field, std::string_view context);

std::string require_string(const Json& object, std::string_view field, std::string_view context);

} // namespace mmkit::io
