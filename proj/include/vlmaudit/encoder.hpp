#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vlmaudit/dataset.hpp"
#include "vlmaudit/image.hpp"
#include "vlmaudit/lexicon.hpp"

namespace vlmaudit {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

double l2_norm(std::span<const double> v);
// Throws ComputationError for zero or non-finite vectors.
EmbeddingVector normalized(std::vector<double> values);

enum class BackendKind { Pretrained, Mock, PatternedMock };
std::string_view to_string(BackendKind k);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

struct BackendInfo {
    std::string name;
    std::size_t dim = 0;
    BackendKind kind = BackendKind::Mock;
    bool supports_gradients = false;
};

// Layer token activations and the gradient of the image-text similarity
// with respect to them, tokens x channels row-major. When present, the
// global summary token is token 0; patch tokens follow in grid row-major
// order.
struct LayerGradients {
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::size_t channels = 0;
    bool has_summary_token = false;
    std::vector<double> activations;
    std::vector<double> gradients;
    double similarity = 0.0;

    std::size_t token_count() const { return (has_summary_token ? 1 : 0) + grid_rows * grid_cols; }
};

inline constexpr std::string_view kDefaultLayer = "final";

class Backend {
public:
    virtual ~Backend() = default;

    virtual const BackendInfo& info() const = 0;

    // Raw embeddings; callers go through encode_* which normalises.
    virtual std::vector<double> embed_text(std::string_view text) const = 0;
    virtual std::vector<double> embed_image(std::span<const std::uint8_t> bytes) const = 0;

    virtual std::vector<std::vector<double>> embed_texts(std::span<const std::string> texts) const;
    virtual std::vector<std::vector<double>> embed_images(
        std::span<const std::vector<std::uint8_t>> images) const;

    // Throws CapabilityError unless info().supports_gradients, ConfigError
    // when `layer` selects nothing.
    virtual LayerGradients layer_gradients(std::span<const std::uint8_t> image, std::string_view text,
                                           std::string_view layer) const;
};

using BackendPtr = std::shared_ptr<const Backend>;

struct EmbeddingBatch {
    std::vector<std::string> ids;
    std::vector<EmbeddingVector> vectors;
    std::string backend_name;

    std::size_t size() const { return ids.size(); }
    std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().dim(); }
};

class EmbeddingCache;

struct EncodeOptions {
    std::size_t batch_size = 32;
    std::size_t threads = 1;
    // Skip unreadable images instead of failing the whole call.
    bool lenient = false;
    EmbeddingCache* cache = nullptr;
};

struct EncodeFailure {
    std::string id;
    std::string message;
};

struct ImageEncoding {
    EmbeddingBatch batch;
    std::vector<EncodeFailure> failures;
};

EmbeddingBatch encode_texts(const std::vector<Prompt>& prompts, const Backend& backend,
                            const EncodeOptions& options = {});
ImageEncoding encode_images(const std::vector<ImageRecord>& records, const Backend& backend,
                            const EncodeOptions& options = {});

// Cache key for a prompt: the encoded text, so template changes miss.
std::string text_cache_key(const Prompt& p);

// ---------------------------------------------------------------------------
// Mock backends

struct PlantedAssociation {
    std::string content_tag;
    std::string prompt_substring;
    double margin = 0.0;

    bool operator==(const PlantedAssociation&) const = default;
};

// Hash-seeded mock. Text vectors are keyed by (seed, text), image vectors by
// (seed, image bytes). Each planted association gets its own direction,
// orthogonal to every other plant direction and to all base vectors; a
// prompt containing the substring gets component kPlantTextWeight along it
// and an image carrying the tag gets margin / kPlantTextWeight, so the
// tagged image's cosine to that prompt is shifted by exactly `margin`.
class MockBackend final : public Backend {
public:
    static constexpr double kPlantTextWeight = 0.6;

    MockBackend(std::uint64_t seed, std::size_t dim, std::vector<PlantedAssociation> plants = {});

    const BackendInfo& info() const override { return info_; }
    std::vector<double> embed_text(std::string_view text) const override;
    std::vector<double> embed_image(std::span<const std::uint8_t> bytes) const override;

    std::uint64_t seed() const { return seed_; }
    const std::vector<PlantedAssociation>& plants() const { return plants_; }

private:
    std::vector<double> base_vector(std::string_view domain, std::string_view key) const;

    BackendInfo info_;
    std::uint64_t seed_;
    std::vector<PlantedAssociation> plants_;
    std::vector<std::vector<double>> directions_;
};

std::shared_ptr<MockBackend> make_mock_backend(std::uint64_t seed, std::size_t dim,
                                               std::vector<PlantedAssociation> plants = {});

// Rectangle of patches in grid coordinates.
struct PatchRect {
    int row = 0;
    int col = 0;
    int rows = 1;
    int cols = 1;

    bool contains(int r, int c) const { return r >= row && r < row + rows && c >= col && c < col + cols; }
    bool operator==(const PatchRect&) const = default;
};

// Pixel bounds [x0, x1) x [y0, y1) of grid cell (r, c) for an image of the
// given size; shared by the patterned backend and saliency code.
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool operator==(const PixelRect&) const = default;
};
PixelRect patch_pixels(int image_width, int image_height, int grid, int r, int c);
PixelRect patch_rect_pixels(int image_width, int image_height, int grid, const PatchRect& rect);

// Differentiable toy vision tower whose image embedding depends only on the
// pixels inside `region`:
//   m_p     = per-channel pixel means of patch p, in [0, 1]
//   a_p     = tanh(W m_p), W >= 0                  ("patch_embed" layer)
//   t_p     = a_p if p in region else 0            ("final" layer tokens)
//   summary = mean_p t_p                           ("final" token 0)
//   e       = bias + summary
// Channel 0 holds a large bias and nothing else. Text embeddings are
// hash-seeded, non-negative and zero on channel 0, so every non-black region
// patch raises the image-text similarity and a black patch contributes
// nothing.
class PatternedBackend final : public Backend {
public:
    static constexpr int kDefaultGrid = 7;
    static constexpr double kBiasScale = 3.0;

    PatternedBackend(PatchRect region, std::size_t dim, int grid = kDefaultGrid, std::uint64_t seed = 0);

    const BackendInfo& info() const override { return info_; }
    std::vector<double> embed_text(std::string_view text) const override;
    std::vector<double> embed_image(std::span<const std::uint8_t> bytes) const override;
    LayerGradients layer_gradients(std::span<const std::uint8_t> image, std::string_view text,
                                   std::string_view layer) const override;

    std::vector<double> embed_pixels(const RgbImage& image) const;
    double similarity(const RgbImage& image, std::string_view text) const;
    // d(similarity)/d(pixel value), laid out like RgbImage::pixels.
    std::vector<double> pixel_gradient(const RgbImage& image, std::string_view text) const;

    const PatchRect& region() const { return region_; }
    int grid() const { return grid_; }

private:
    struct Forward {
        std::vector<double> patch_acts;  // N x C, pre-gate
        std::vector<double> raw;         // e
    };
    Forward forward(const RgbImage& image) const;
    std::vector<double> similarity_gradient(const std::vector<double>& raw, const std::vector<double>& text,
                                            double* similarity) const;

    BackendInfo info_;
    PatchRect region_;
    int grid_;
    std::uint64_t seed_;
    std::vector<double> weights_;  // C x 3
    std::vector<double> bias_;     // C
};

std::shared_ptr<PatternedBackend> make_patterned_backend(PatchRect region, std::size_t dim,
                                                         int grid = PatternedBackend::kDefaultGrid,
                                                         std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Backend configuration block:
//   {kind, checkpoint_name?, endpoint?, seed?, dim?, patch_grid?, region?,
//    planted_associations?, timeout_seconds?}

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string checkpoint_name;
    std::string endpoint;
    std::uint64_t seed = 0;
    std::size_t dim = 64;
    int patch_grid = PatternedBackend::kDefaultGrid;
    PatchRect region{0, 0, PatternedBackend::kDefaultGrid, PatternedBackend::kDefaultGrid};
    std::vector<PlantedAssociation> planted_associations;
    double timeout_seconds = 120.0;
};

BackendPtr make_backend(const BackendConfig& config);

}  // namespace vlmaudit
