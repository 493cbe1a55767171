#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vlmaudit/dataset.hpp"
#include "vlmaudit/encoder.hpp"
#include "vlmaudit/image.hpp"

namespace vlmaudit {

struct Question {
    std::string text;
    std::string prompt_text;  // what is actually encoded
};

// Questions are encoded verbatim, without the keyword prompt template.
Question make_question(std::string text);

struct SaliencyMap {
    int grid_rows = 0;
    int grid_cols = 0;
    std::vector<double> grid;  // unnormalized Grad-CAM values, row-major
    int width = 0;
    int height = 0;
    std::vector<double> upsampled;  // width x height, min-max normalized to [0, 1]
    double similarity = 0.0;

    double grid_at(int r, int c) const { return grid[static_cast<std::size_t>(r * grid_cols + c)]; }
    double at(int x, int y) const { return upsampled[static_cast<std::size_t>(y) * width + x]; }
};

struct GradCamOptions {
    std::string layer = std::string(kDefaultLayer);
    bool signed_map = false;  // keep negative contributions
};

double vqa_similarity(const ImageRecord& image, const Question& q, const Backend& backend);

SaliencyMap grad_cam(const ImageRecord& image, const Question& q, const Backend& backend,
                     const GradCamOptions& options = {});
// Same computation on PNG bytes already in memory.
SaliencyMap grad_cam(std::span<const std::uint8_t> png, const Question& q, const Backend& backend,
                     const GradCamOptions& options = {});

// Grad-CAM reduction of one layer's activations and gradients to a grid.
std::vector<double> cam_grid(const LayerGradients& lg, bool signed_map = false);

// Bilinear (half-pixel centres, edge clamped) resize of a grid to an image.
std::vector<double> upsample_bilinear(const std::vector<double>& grid, int rows, int cols, int width, int height);

// Min-max normalization to [0, 1]; a constant input maps to all zeros.
void min_max_normalize(std::vector<double>& values);

// Share of positive grid mass inside `rect`; 0 when the grid has no mass.
double grid_mass_fraction(const SaliencyMap& map, const PatchRect& rect);
// Share of upsampled mass inside a pixel rectangle.
double mass_fraction(const SaliencyMap& map, const PixelRect& rect);

struct AnswerRegion {
    PixelRect bbox;
    std::size_t index = 0;  // position in the candidate list
    double mass_fraction = 0.0;
};

// Candidate with the largest mass fraction; the first one wins ties.
AnswerRegion answer_region(const SaliencyMap& map, const std::vector<PixelRect>& candidates);

// Left/right halves and the four quadrants of an image.
std::vector<PixelRect> halves(int width, int height);
std::vector<PixelRect> quadrants(int width, int height);

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    bool operator==(const Rgb&) const = default;
};

// Five-stop gradient: blue, cyan, green, yellow, red over [0, 1].
Rgb colormap(double v);

RgbImage overlay(const RgbImage& image, const SaliencyMap& map, double alpha);
std::vector<std::uint8_t> overlay(const ImageRecord& image, const SaliencyMap& map, double alpha);

// {image_id, question, similarity, grid, bbox?, mass_fraction?}
std::string saliency_sidecar_json(const std::string& image_id, const Question& q, const SaliencyMap& map,
                                  const std::optional<AnswerRegion>& answer = std::nullopt);

}  // namespace vlmaudit
