#include "vlmaudit/saliency.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <json.hpp>

#include "vlmaudit/analysis.hpp"
#include "vlmaudit/error.hpp"

namespace vlmaudit {

Question make_question(std::string text) {
    if (text.empty()) throw ConfigError("question text is empty");
    Question q;
    q.prompt_text = text;
    q.text = std::move(text);
    return q;
}

double vqa_similarity(const ImageRecord& image, const Question& q, const Backend& backend) {
    try {
        const auto bytes = read_bytes(image.file_path);
        const auto img = normalized(backend.embed_image(bytes));
        const auto txt = normalized(backend.embed_text(q.prompt_text));
        return cosine(img, txt);
    } catch (const Error& e) {
        throw StageError("vqa similarity for image " + image.id, e);
    }
}

std::vector<double> cam_grid(const LayerGradients& lg, bool signed_map) {
    const std::size_t patches = lg.grid_rows * lg.grid_cols;
    const std::size_t offset = lg.has_summary_token ? 1 : 0;
    const std::size_t c = lg.channels;
    if (patches == 0 || c == 0 || lg.activations.size() != lg.token_count() * c ||
        lg.gradients.size() != lg.token_count() * c) {
        throw ContractError("layer gradients do not match their grid and channel count");
    }
    std::vector<double> weights(c, 0.0);
    for (std::size_t p = 0; p < patches; ++p) {
        for (std::size_t k = 0; k < c; ++k) weights[k] += lg.gradients[(offset + p) * c + k];
    }
    for (double& w : weights) w /= static_cast<double>(patches);

    std::vector<double> grid(patches, 0.0);
    for (std::size_t p = 0; p < patches; ++p) {
        double v = 0.0;
        for (std::size_t k = 0; k < c; ++k) v += weights[k] * lg.activations[(offset + p) * c + k];
        grid[p] = signed_map ? v : std::max(0.0, v);
    }
    return grid;
}

std::vector<double> upsample_bilinear(const std::vector<double>& grid, int rows, int cols, int width, int height) {
    if (rows <= 0 || cols <= 0 || width <= 0 || height <= 0 ||
        grid.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw ContractError("upsample: bad grid or target size");
    }
    auto axis = [](int i, int out, int in, int& lo, int& hi, double& t) {
        double g = (i + 0.5) * in / out - 0.5;
        g = std::clamp(g, 0.0, static_cast<double>(in - 1));
        lo = static_cast<int>(std::floor(g));
        hi = std::min(lo + 1, in - 1);
        t = g - lo;
    };
    std::vector<double> out(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        int r0, r1;
        double ty;
        axis(y, height, rows, r0, r1, ty);
        for (int x = 0; x < width; ++x) {
            int c0, c1;
            double tx;
            axis(x, width, cols, c0, c1, tx);
            // a + t (b - a) is exact when a == b, so flat regions stay flat.
            auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
            const double top = lerp(grid[r0 * cols + c0], grid[r0 * cols + c1], tx);
            const double bottom = lerp(grid[r1 * cols + c0], grid[r1 * cols + c1], tx);
            out[static_cast<std::size_t>(y) * width + x] = lerp(top, bottom, ty);
        }
    }
    return out;
}

void min_max_normalize(std::vector<double>& values) {
    if (values.empty()) return;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo;
    const double range = *hi - min;
    if (!(range > 0.0)) {
        std::fill(values.begin(), values.end(), 0.0);
        return;
    }
    for (double& v : values) v = std::clamp((v - min) / range, 0.0, 1.0);
}

SaliencyMap grad_cam(std::span<const std::uint8_t> png, const Question& q, const Backend& backend,
                     const GradCamOptions& options) {
    if (!backend.info().supports_gradients) {
        throw CapabilityError("backend '" + backend.info().name + "' does not expose gradients");
    }
    const auto info = probe_png(png);
    if (!info) throw ComputationError("saliency input is not a PNG image");
    const auto lg = backend.layer_gradients(png, q.prompt_text, options.layer);

    SaliencyMap map;
    map.grid_rows = static_cast<int>(lg.grid_rows);
    map.grid_cols = static_cast<int>(lg.grid_cols);
    map.grid = cam_grid(lg, options.signed_map);
    map.width = info->width;
    map.height = info->height;
    map.upsampled = upsample_bilinear(map.grid, map.grid_rows, map.grid_cols, map.width, map.height);
    min_max_normalize(map.upsampled);
    map.similarity = lg.similarity;
    return map;
}

SaliencyMap grad_cam(const ImageRecord& image, const Question& q, const Backend& backend,
                     const GradCamOptions& options) {
    if (!backend.info().supports_gradients) {
        throw CapabilityError("backend '" + backend.info().name + "' does not expose gradients");
    }
    const auto bytes = read_bytes(image.file_path);
    return grad_cam(bytes, q, backend, options);
}

double grid_mass_fraction(const SaliencyMap& map, const PatchRect& rect) {
    double inside = 0.0, total = 0.0;
    for (int r = 0; r < map.grid_rows; ++r) {
        for (int c = 0; c < map.grid_cols; ++c) {
            const double v = std::max(0.0, map.grid_at(r, c));
            total += v;
            if (rect.contains(r, c)) inside += v;
        }
    }
    return total > 0.0 ? inside / total : 0.0;
}

namespace {

void check_rect(const SaliencyMap& map, const PixelRect& rect) {
    if (rect.x0 < 0 || rect.y0 < 0 || rect.x1 > map.width || rect.y1 > map.height || rect.x0 >= rect.x1 ||
        rect.y0 >= rect.y1) {
        throw ContractError("candidate rectangle outside the " + std::to_string(map.width) + "x" +
                            std::to_string(map.height) + " image");
    }
}

}  // namespace

double mass_fraction(const SaliencyMap& map, const PixelRect& rect) {
    check_rect(map, rect);
    double inside = 0.0, total = 0.0;
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const double v = map.at(x, y);
            total += v;
            if (x >= rect.x0 && x < rect.x1 && y >= rect.y0 && y < rect.y1) inside += v;
        }
    }
    return total > 0.0 ? std::clamp(inside / total, 0.0, 1.0) : 0.0;
}

AnswerRegion answer_region(const SaliencyMap& map, const std::vector<PixelRect>& candidates) {
    if (candidates.empty()) throw ContractError("answer_region needs at least one candidate");
    AnswerRegion best;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double m = mass_fraction(map, candidates[i]);
        if (i == 0 || m > best.mass_fraction) best = {candidates[i], i, m};
    }
    return best;
}

std::vector<PixelRect> halves(int width, int height) {
    const int mid = width / 2;
    return {{0, 0, mid, height}, {mid, 0, width, height}};
}

std::vector<PixelRect> quadrants(int width, int height) {
    const int mx = width / 2;
    const int my = height / 2;
    return {{0, 0, mx, my}, {mx, 0, width, my}, {0, my, mx, height}, {mx, my, width, height}};
}

Rgb colormap(double v) {
    static constexpr std::array<std::array<double, 3>, 5> stops = {{
        {0, 0, 255},
        {0, 255, 255},
        {0, 255, 0},
        {255, 255, 0},
        {255, 0, 0},
    }};
    v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    const double pos = v * (stops.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), stops.size() - 2);
    const double t = pos - static_cast<double>(i);
    auto mix = [&](int ch) {
        return static_cast<std::uint8_t>(std::lround(stops[i][ch] * (1 - t) + stops[i + 1][ch] * t));
    };
    return {mix(0), mix(1), mix(2)};
}

RgbImage overlay(const RgbImage& image, const SaliencyMap& map, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("overlay alpha must lie in [0, 1]");
    if (image.width != map.width || image.height != map.height) {
        throw ContractError("saliency map size does not match the image");
    }
    RgbImage out = image;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const Rgb c = colormap(map.at(x, y));
            const std::uint8_t heat[3] = {c.r, c.g, c.b};
            std::uint8_t* px = out.at(x, y);
            for (int k = 0; k < 3; ++k) {
                px[k] = static_cast<std::uint8_t>(std::lround((1.0 - alpha) * px[k] + alpha * heat[k]));
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> overlay(const ImageRecord& image, const SaliencyMap& map, double alpha) {
    const auto decoded = decode_png(read_bytes(image.file_path));
    return encode_png(overlay(decoded.image, map, alpha));
}

std::string saliency_sidecar_json(const std::string& image_id, const Question& q, const SaliencyMap& map,
                                  const std::optional<AnswerRegion>& answer) {
    nlohmann::ordered_json j;
    j["image_id"] = image_id;
    j["question"] = q.text;
    j["similarity"] = map.similarity;
    auto grid = nlohmann::ordered_json::array();
    for (int r = 0; r < map.grid_rows; ++r) {
        auto row = nlohmann::ordered_json::array();
        for (int c = 0; c < map.grid_cols; ++c) row.push_back(map.grid_at(r, c));
        grid.push_back(std::move(row));
    }
    j["grid"] = std::move(grid);
    if (answer) {
        j["bbox"] = {answer->bbox.x0, answer->bbox.y0, answer->bbox.x1, answer->bbox.y1};
        j["mass_fraction"] = answer->mass_fraction;
    }
    return j.dump(2) + "\n";
}

}  // namespace vlmaudit
