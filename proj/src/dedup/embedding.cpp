// SPDX-License-Identifier: Apache-2.0
#include "mmkit/dedup/embedding.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <algorithm>

#include "mmkit/common/error.hpp"
#include "mmkit/common/jsonl.hpp"
#include "mmkit/common/parallel.hpp"

namespace mmkit::dedup {

using nlohmann::json;

void check_collection(const std::vector<EmbeddingVector>& vectors) {
    if (vectors.empty()) return;
    const std::size_t dim = vectors.front().dim();
    for (const auto& v : vectors) {
        if (v.dim() != dim)
            throw Error(ErrorKind::Validation, "embedding " + v.image_id + " has dim " + std::to_string(v.dim()) +
                                                   ", expected " + std::to_string(dim));
        for (float x : v.vector)
            if (!std::isfinite(x)) throw Error(ErrorKind::Validation, "embedding " + v.image_id + " has a non-finite entry");
    }
}

std::filesystem::path sidecar_path(const std::filesystem::path& bin_path) {
    auto p = bin_path;
    p.replace_extension(".json");
    return p;
}

void write_embeddings(const std::filesystem::path& bin_path, const EmbeddingFile& file) {
    check_collection(file.vectors);
    const std::size_t dim = file.vectors.empty() ? 0 : file.vectors.front().dim();
    std::string bytes;
    bytes.reserve(file.vectors.size() * dim * 4);
    std::vector<std::string> ids;
    for (const auto& v : file.vectors) {
        ids.push_back(v.image_id);
        for (float x : v.vector) {
            auto bits = std::bit_cast<std::uint32_t>(x);
            for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
        }
    }
    io::write_file_atomic(bin_path, bytes);
    io::write_json_atomic(sidecar_path(bin_path),
                          {{"dim", dim}, {"count", file.vectors.size()}, {"ids", ids}, {"pooling", file.pooling}});
}

EmbeddingFile read_embeddings(const std::filesystem::path& bin_path) {
    const json meta = io::read_json(sidecar_path(bin_path));
    const auto dim = io::require(meta, "dim", "embedding sidecar").get<std::size_t>();
    const auto count = io::require(meta, "count", "embedding sidecar").get<std::size_t>();
    const auto ids = io::require(meta, "ids", "embedding sidecar").get<std::vector<std::string>>();
    if (ids.size() != count) throw Error(ErrorKind::Schema, "embedding sidecar: ids length differs from count");
    const std::string bytes = io::read_file(bin_path);
    if (bytes.size() != dim * count * 4)
        throw Error(ErrorKind::Schema, bin_path.string() + ": expected " + std::to_string(dim * count * 4) +
                                           " bytes, found " + std::to_string(bytes.size()));
    EmbeddingFile file;
    file.pooling = meta.value("pooling", "");
    file.vectors.reserve(count);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < count; ++i) {
        EmbeddingVector v{ids[i], std::vector<float>(dim)};
        for (std::size_t d = 0; d < dim; ++d) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= std::uint32_t(static_cast<unsigned char>(bytes[offset++])) << (8 * b);
            v.vector[d] = std::bit_cast<float>(bits);
        }
        file.vectors.push_back(std::move(v));
    }
    check_collection(file.vectors);
    return file;
}

RemoteImageEmbedder::RemoteImageEmbedder(std::unique_ptr<JsonTransport> transport, RetryPolicy retry)
    : transport_(std::move(transport)), retry_(retry) {}

EmbedReply RemoteImageEmbedder::embed(const std::vector<corpus::ImageRef>& images) {
    json ids = json::array();
    json uris = json::array();
    for (const auto& img : images) {
        ids.push_back(img.image_id);
        uris.push_back(img.uri);
    }
    const json reply = call_with_retry(*transport_, "/embed", {{"image_ids", ids}, {"uris", uris}}, retry_);
    if (reply.contains("error")) throw Error(ErrorKind::Transport, "embedder error: " + reply.at("error").dump());
    EmbedReply out;
    try {
        out.dim = reply.at("dim").get<std::size_t>();
        out.vectors = reply.at("vectors").get<std::vector<std::vector<float>>>();
        out.pooling = reply.value("pooling", "");
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Transport, std::string("malformed embedder reply: ") + e.what());
    }
    return out;
}

std::filesystem::path uri_to_path(const std::string& uri) {
    constexpr std::string_view kFile = "file://";
    if (uri.rfind(kFile, 0) == 0) return uri.substr(kFile.size());
    return uri;
}

namespace {

class NetpbmReader {
  public:
    explicit NetpbmReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

    GrayImage read() {
        if (data_.size() < 2 || data_[0] != 'P') fail("not a netpbm file");
        const char magic = data_[1];
        pos_ = 2;
        const bool color = magic == '3' || magic == '6';
        const bool ascii = magic == '2' || magic == '3';
        if (magic != '2' && magic != '3' && magic != '5' && magic != '6') fail("unsupported netpbm type");
        GrayImage img;
        img.width = header_number();
        img.height = header_number();
        const std::size_t maxval = header_number();
        if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) fail("bad header");
        const double scale = 255.0 / static_cast<double>(maxval);
        const std::size_t channels = color ? 3 : 1;
        const std::size_t samples = img.width * img.height * channels;
        std::vector<double> raw;
        raw.reserve(samples);
        if (ascii) {
            for (std::size_t i = 0; i < samples; ++i) raw.push_back(static_cast<double>(header_number()));
        } else {
            ++pos_;  // single whitespace after maxval
            const std::size_t width = maxval > 255 ? 2 : 1;
            if (pos_ + samples * width > data_.size()) fail("truncated pixel data");
            for (std::size_t i = 0; i < samples; ++i) {
                std::size_t v = static_cast<unsigned char>(data_[pos_]);
                if (width == 2) v = (v << 8) | static_cast<unsigned char>(data_[pos_ + 1]);
                pos_ += width;
                raw.push_back(static_cast<double>(v));
            }
        }
        img.luma.resize(img.width * img.height);
        for (std::size_t p = 0; p < img.luma.size(); ++p) {
            if (color) {
                img.luma[p] = (0.299 * raw[3 * p] + 0.587 * raw[3 * p + 1] + 0.114 * raw[3 * p + 2]) * scale;
            } else {
                img.luma[p] = raw[p] * scale;
            }
        }
        return img;
    }

  private:
    [[noreturn]] void fail(const std::string& what) const { throw Error(ErrorKind::Decode, name_ + ": " + what); }

    std::size_t header_number() {
        for (;;) {
            while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
            if (pos_ < data_.size() && data_[pos_] == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
                continue;
            }
            break;
        }
        if (pos_ >= data_.size() || !std::isdigit(static_cast<unsigned char>(data_[pos_]))) fail("expected a number");
        std::size_t v = 0;
        while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) v = v * 10 + (data_[pos_++] - '0');
        return v;
    }

    std::string data_;
    std::string name_;
    std::size_t pos_ = 0;
};

} // namespace

GrayImage load_netpbm(const std::filesystem::path& path) {
    return NetpbmReader(io::read_file(path), path.string()).read();
}

EmbedReply PixelEmbedder::embed(const std::vector<corpus::ImageRef>& images) {
    EmbedReply reply;
    reply.dim = grid_ * grid_;
    reply.pooling = "pixel-grid-mean";
    for (const auto& ref : images) {
        const GrayImage img = load_netpbm(uri_to_path(ref.uri));
        if (img.width < grid_ || img.height < grid_)
            throw Error(ErrorKind::Decode, ref.uri + ": image smaller than the " + std::to_string(grid_) + "px grid");
        std::vector<double> sums(grid_ * grid_, 0.0);
        std::vector<std::size_t> counts(grid_ * grid_, 0);
        for (std::size_t y = 0; y < img.height; ++y) {
            const std::size_t cy = y * grid_ / img.height;
            for (std::size_t x = 0; x < img.width; ++x) {
                const std::size_t cell = cy * grid_ + x * grid_ / img.width;
                sums[cell] += img.luma[y * img.width + x];
                ++counts[cell];
            }
        }
        std::vector<float> v(grid_ * grid_);
        for (std::size_t c = 0; c < v.size(); ++c) v[c] = static_cast<float>(sums[c] / static_cast<double>(counts[c]));
        reply.vectors.push_back(std::move(v));
    }
    return reply;
}

EmbedOutcome embed_images(const std::vector<corpus::ImageRef>& images, ImageEmbedderClient& embedder,
                          const EmbedOptions& options) {
    EmbedOutcome outcome;
    if (images.empty()) return outcome;
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    const std::size_t batches = (images.size() + batch - 1) / batch;

    std::vector<std::optional<std::vector<float>>> results(images.size());
    std::vector<std::string> errors(images.size());
    std::mutex meta_mutex;
    std::optional<std::size_t> dim;
    std::string pooling;

    auto accept = [&](const EmbedReply& reply, std::size_t first, std::size_t n) {
        if (reply.vectors.size() != n)
            throw Error(ErrorKind::Validation, "embedder returned " + std::to_string(reply.vectors.size()) +
                                                   " vectors for " + std::to_string(n) + " images");
        std::lock_guard lock(meta_mutex);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t d = reply.vectors[i].size();
            if (d != reply.dim || (dim && *dim != d))
                throw Error(ErrorKind::Validation, "embedding dimension mismatch for " + images[first + i].image_id);
            dim = d;
            results[first + i] = reply.vectors[i];
        }
        if (pooling.empty()) pooling = reply.pooling;
    };

    parallel_for(batches, options.parallelism, [&](std::size_t b) {
        const std::size_t first = b * batch;
        const std::size_t n = std::min(batch, images.size() - first);
        std::vector<corpus::ImageRef> slice(images.begin() + first, images.begin() + first + n);
        try {
            accept(embedder.embed(slice), first, n);
            return;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Validation) throw;
            if (n == 1) {
                errors[first] = e.what();
                return;
            }
        }
        // Isolate the failing image(s).
        for (std::size_t i = 0; i < n; ++i) {
            try {
                accept(embedder.embed({images[first + i]}), first + i, 1);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::Validation) throw;
                errors[first + i] = e.what();
            }
        }
    });

    for (std::size_t i = 0; i < images.size(); ++i) {
        if (results[i]) {
            outcome.vectors.push_back({images[i].image_id, std::move(*results[i])});
        } else {
            outcome.errors.push_back({images[i].image_id, errors[i]});
        }
    }
    outcome.pooling = pooling;
    return outcome;
}

} // namespace mmkit::dedup
