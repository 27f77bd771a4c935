// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmkit/bench/item.hpp"
#include "mmkit/common/transport.hpp"
#include "mmkit/corpus/document.hpp"

namespace mmkit::dedup {

struct EmbeddingVector {
    std::string image_id;
    std::vector<float> vector;

    std::size_t dim() const { return vector.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

/// Throws Validation unless every entry is finite and all dims agree.
void check_collection(const std::vector<EmbeddingVector>& vectors);

struct EmbeddingFile {
    std::vector<EmbeddingVector> vectors;
    std::string pooling;
};

/// Little-endian f32 row-major matrix at `bin_path`, plus a JSON sidecar
/// {"dim","count","ids","pooling"} at bin_path with extension ".json".
void write_embeddings(const std::filesystem::path& bin_path, const EmbeddingFile& file);
EmbeddingFile read_embeddings(const std::filesystem::path& bin_path);
std::filesystem::path sidecar_path(const std::filesystem::path& bin_path);

// Embedding clients ----------------------------------------------------

struct EmbedReply {
    std::size_t dim = 0;
    std::vector<std::vector<float>> vectors;
    std::string pooling;
};

/// The provider returns exactly one vector per image and declares its own
/// pooling; the toolkit never pools.
class ImageEmbedderClient {
  public:
    virtual ~ImageEmbedderClient() = default;
    virtual EmbedReply embed(const std::vector<corpus::ImageRef>& images) = 0;
};

/// POST /embed {"image_ids","uris"} → {"dim","vectors","pooling"}.
class RemoteImageEmbedder final : public ImageEmbedderClient {
  public:
    explicit RemoteImageEmbedder(std::unique_ptr<JsonTransport> transport, RetryPolicy retry = {});
    EmbedReply embed(const std::vector<corpus::ImageRef>& images) override;

  private:
    std::unique_ptr<JsonTransport> transport_;
    RetryPolicy retry_;
};

/// Reference embedder: loads a netpbm image (P2/P3/P5/P6) from a file path
/// or file:// uri, converts to luma, and averages into a grid x grid
/// raster, where pixel (y, x) falls in cell (y*grid/H, x*grid/W).
class PixelEmbedder final : public ImageEmbedderClient {
  public:
    explicit PixelEmbedder(std::size_t grid = 8) : grid_(grid) {}
    EmbedReply embed(const std::vector<corpus::ImageRef>& images) override;

  private:
    std::size_t grid_;
};

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> luma;  // row-major, 0..255
};

/// Throws Io or Decode.
GrayImage load_netpbm(const std::filesystem::path& path);
std::filesystem::path uri_to_path(const std::string& uri);

struct EmbedOptions {
    std::size_t batch_size = 16;
    std::size_t parallelism = 8;
};

struct ItemError {
    std::string image_id;
    std::string message;
};

struct EmbedOutcome {
    std::vector<EmbeddingVector> vectors;  // successes, input order
    std::vector<ItemError> errors;
    std::string pooling;
};

/// Per-image fetch or transport failures become item errors and the batch
/// continues; a reply whose dimension disagrees with earlier replies, or
/// whose vector count differs from the request, is fatal.
EmbedOutcome embed_images(const std::vector<corpus::ImageRef>& images, ImageEmbedderClient& embedder,
                          const EmbedOptions& options = {});

// Leakage screening ----------------------------------------------------

inline constexpr std::size_t kDefaultK = 5;
inline constexpr double kDefaultThreshold = 80.0;

struct DistancePair {
    std::string eval_image_id;
    std::string train_image_id;
    double distance = 0.0;
    bool operator==(const DistancePair&) const = default;
};

struct LeakageReport {
    double threshold = kDefaultThreshold;
    std::vector<std::string> flagged;  // sorted, unique
    std::size_t total_eval = 0;
    std::size_t removed_count = 0;
};

/// Euclidean distance accumulated in double in index order.
double euclidean(const std::vector<float>& a, const std::vector<float>& b);

/// Exact flat search: for each eval vector its k nearest train vectors,
/// ties broken by train image_id; output sorted ascending by distance, then
/// eval id, then train id. k larger than the train set is clamped.
std::vector<DistancePair> knn_pairs(const std::vector<EmbeddingVector>& eval,
                                    const std::vector<EmbeddingVector>& train, std::size_t k = kDefaultK,
                                    std::size_t workers = 1);

LeakageReport apply_threshold(const std::vector<DistancePair>& pairs, double threshold, std::size_t total_eval);

/// Drops items with any image in the flagged set; order preserved.
std::vector<bench::VqaItem> filter_eval_set(const std::vector<bench::VqaItem>& items, const LeakageReport& report);

nlohmann::json to_json(const DistancePair& pair);
DistancePair pair_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LeakageReport& report);
LeakageReport report_from_json(const nlohmann::json& j);

// Clustering -----------------------------------------------------------

inline constexpr std::size_t kDefaultClusters = 100;

struct ClusterResult {
    std::vector<std::size_t> assignment;
    std::vector<std::vector<double>> centroids;
    std::vector<double> objective_history;  // after each assignment step
    std::size_t iterations = 0;
    bool converged = false;
};

/// Lloyd's k-means with k-means++ seeding. Empty clusters keep their
/// previous centroid, so the objective never increases.
ClusterResult cluster_embeddings(const std::vector<EmbeddingVector>& vectors, std::size_t k, std::uint64_t seed,
                                 std::size_t max_iters = 100);

} // namespace mmkit::dedup
