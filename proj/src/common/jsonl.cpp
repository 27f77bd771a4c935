// SPDX-License-Identifier: Apache-2.0
#include "mmkit/common/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "mmkit/common/error.hpp"

namespace mmkit::io {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const Json&)>& on_record, bool tolerate_torn_tail) {
    const std::string data = read_file(path);
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < data.size()) {
        std::size_t end = data.find('\n', start);
        const bool terminated = end != std::string::npos;
        if (!terminated) end = data.size();
        ++line_no;
        std::string_view line(data.data() + start, end - start);
        start = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        Json record;
        try {
            record = Json::parse(line);
        } catch (const Json::exception& e) {
            if (tolerate_torn_tail && !terminated) return;
            throw Error(ErrorKind::Schema, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        on_record(line_no, record);
    }
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
    std::vector<Json> records;
    for_each_jsonl(path, [&](std::size_t, const Json& r) { records.push_back(r); });
    return records;
}

void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<Json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump();
        out.push_back('\n');
    }
    write_file_atomic(path, out);
}

Json read_json(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    try {
        return Json::parse(data);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Schema, path.string() + ": " + e.what());
    }
}

void write_json_atomic(const std::filesystem::path& path, const Json& value, int indent) {
    write_file_atomic(path, value.dump(indent) + "\n");
}

const Json& require(const Json& object, std::string_view field, std::string_view context) {
    if (!object.is_object()) throw Error(ErrorKind::Schema, std::string(context) + ": expected an object");
    const auto it = object.find(field);
    if (it == object.end())
        throw Error(ErrorKind::Schema, std::string(context) + ": missing field '" + std::string(field) + "'");
    return *it;
}

std::string require_string(const Json& object, std::string_view field, std::string_view context) {
    const Json& value = require(object, field, context);
    if (!value.is_string())
        throw Error(ErrorKind::Schema, std::string(context) + ": field '" + std::string(field) + "' must be a string");
    return value.get<std::string>();
}

} // namespace mmkit::io
