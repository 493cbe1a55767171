#include "vlmaudit/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "vlmaudit/error.hpp"

namespace vlmaudit::render {

namespace {

using Glyph = std::array<std::uint8_t, 7>;

struct GlyphEntry {
    char ch;
    Glyph rows;
};

constexpr GlyphEntry kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}}, {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}}, {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}}, {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'<', {0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02}}, {'>', {0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08}},
    {'|', {0x04, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}}, {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
};

const Glyph* glyph(char ch) {
    if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
    for (const auto& g : kFont) {
        if (g.ch == ch) return &g.rows;
    }
    if (ch == ' ') return nullptr;
    return glyph('?');
}

constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrey{200, 200, 200};
constexpr Rgb kAxis{60, 60, 60};

std::string fixed(double v, int decimals) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string general(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

Rgb ink_for(Rgb bg) {
    const double luma = 0.299 * bg.r + 0.587 * bg.g + 0.114 * bg.b;
    return luma > 140 ? kBlack : Rgb{255, 255, 255};
}

}  // namespace

Canvas::Canvas(int width, int height, Rgb background) {
    if (width <= 0 || height <= 0) throw ContractError("canvas size must be positive");
    image_.width = width;
    image_.height = height;
    image_.pixels.resize(static_cast<std::size_t>(width) * height * 3);
    fill_rect(0, 0, width, height, background);
}

void Canvas::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= image_.width || y >= image_.height) return;
    auto* px = image_.at(x, y);
    px[0] = c.r;
    px[1] = c.g;
    px[2] = c.b;
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = std::max(0, y0); y < std::min(y1, image_.height); ++y) {
        for (int x = std::max(0, x0); x < std::min(x1, image_.width); ++x) set(x, y, c);
    }
}

void Canvas::outline_rect(int x0, int y0, int x1, int y1, Rgb c) {
    line(x0, y0, x1 - 1, y0, c);
    line(x0, y1 - 1, x1 - 1, y1 - 1, c);
    line(x0, y0, x0, y1 - 1, c);
    line(x1 - 1, y0, x1 - 1, y1 - 1, c);
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Canvas::text(int x, int y, std::string_view s, Rgb c, int scale) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Glyph* g = glyph(s[i]);
        if (!g) continue;
        const int gx = x + static_cast<int>(i) * 6 * scale;
        for (int row = 0; row < 7; ++row) {
            for (int col = 0; col < 5; ++col) {
                if ((*g)[row] & (0x10 >> col)) fill_rect(gx + col * scale, y + row * scale, gx + (col + 1) * scale,
                                                         y + (row + 1) * scale, c);
            }
        }
    }
}

RgbImage heatmap(const HeatmapSpec& spec) {
    const int rows = static_cast<int>(spec.row_labels.size());
    const int cols = static_cast<int>(spec.col_labels.size());
    if (rows == 0 || cols == 0 || spec.values.size() != static_cast<std::size_t>(rows * cols)) {
        throw ContractError("heatmap values do not match its labels");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : spec.values) {
        if (std::isnan(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;

    constexpr int kCellW = 44, kCellH = 20, kPad = 10, kBarW = 14;
    int label_w = 0;
    for (const auto& l : spec.row_labels) label_w = std::max(label_w, Canvas::text_width(l));
    const int left = kPad + label_w + 6;
    const int top = kPad + Canvas::text_height(2) + 8 + Canvas::text_height() + 4;
    const int grid_w = cols * kCellW;
    const int grid_h = rows * kCellH;
    const int legend_x = left + grid_w + 16;
    const int width = legend_x + kBarW + 8 + Canvas::text_width(fixed(std::max(std::abs(lo), std::abs(hi)), 3)) + 8 +
                      kPad;
    const int height = top + grid_h + kPad;

    Canvas canvas(width, height);
    canvas.text(kPad, kPad, spec.title, kBlack, 2);
    for (int c = 0; c < cols; ++c) {
        const auto& l = spec.col_labels[c];
        canvas.text(left + c * kCellW + (kCellW - Canvas::text_width(l)) / 2, top - Canvas::text_height() - 2, l,
                    kBlack);
    }
    for (int r = 0; r < rows; ++r) {
        const int y = top + r * kCellH;
        canvas.text(left - 6 - Canvas::text_width(spec.row_labels[r]), y + (kCellH - 7) / 2, spec.row_labels[r],
                    kBlack);
        for (int c = 0; c < cols; ++c) {
            const double v = spec.values[static_cast<std::size_t>(r * cols + c)];
            const int x = left + c * kCellW;
            if (std::isnan(v)) {
                canvas.fill_rect(x, y, x + kCellW, y + kCellH, kGrey);
                continue;
            }
            const Rgb bg = colormap(hi > lo ? (v - lo) / (hi - lo) : 0.0);
            canvas.fill_rect(x, y, x + kCellW, y + kCellH, bg);
            const auto label = fixed(v, 3);
            canvas.text(x + (kCellW - Canvas::text_width(label)) / 2, y + (kCellH - 7) / 2, label, ink_for(bg));
        }
    }
    canvas.outline_rect(left - 1, top - 1, left + grid_w + 1, top + grid_h + 1, kAxis);

    for (int y = 0; y < grid_h; ++y) {
        const double t = 1.0 - static_cast<double>(y) / std::max(1, grid_h - 1);
        canvas.fill_rect(legend_x, top + y, legend_x + kBarW, top + y + 1, colormap(t));
    }
    canvas.outline_rect(legend_x - 1, top - 1, legend_x + kBarW + 1, top + grid_h + 1, kAxis);
    canvas.text(legend_x + kBarW + 6, top, fixed(hi, 3), kBlack);
    canvas.text(legend_x + kBarW + 6, top + grid_h - 7, fixed(lo, 3), kBlack);
    return canvas.image();
}

RgbImage scatter(const ScatterSpec& spec) {
    if (spec.xs.size() != spec.ys.size() || spec.xs.empty()) throw ContractError("scatter needs paired points");
    constexpr int kWidth = 520, kHeight = 380;
    constexpr int kLeft = 70, kRight = 30, kTop = 56, kBottom = 50;
    const int pw = kWidth - kLeft - kRight;
    const int ph = kHeight - kTop - kBottom;

    auto range = [](const std::vector<double>& v) {
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        double a = *lo, b = *hi;
        const double pad = b > a ? 0.08 * (b - a) : 0.5;
        return std::pair{a - pad, b + pad};
    };
    const auto [x0, x1] = range(spec.xs);
    const auto [y0, y1] = range(spec.ys);
    auto px = [&](double x) { return kLeft + static_cast<int>(std::lround((x - x0) / (x1 - x0) * pw)); };
    auto py = [&](double y) { return kTop + ph - static_cast<int>(std::lround((y - y0) / (y1 - y0) * ph)); };

    Canvas canvas(kWidth, kHeight);
    canvas.text(kLeft, 10, spec.title, kBlack, 2);
    canvas.text(kLeft, 32, "r=" + fixed(spec.r, 2) + "  p=" + general(spec.p), kBlack);
    canvas.outline_rect(kLeft, kTop, kLeft + pw + 1, kTop + ph + 1, kAxis);

    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0;
        const double yv = y0 + (y1 - y0) * i / 4.0;
        const int tx = px(xv), ty = py(yv);
        canvas.line(tx, kTop + ph, tx, kTop + ph + 4, kAxis);
        const auto xl = fixed(xv, 3);
        canvas.text(tx - Canvas::text_width(xl) / 2, kTop + ph + 8, xl, kBlack);
        canvas.line(kLeft - 4, ty, kLeft, ty, kAxis);
        const auto yl = fixed(yv, 3);
        canvas.text(kLeft - 8 - Canvas::text_width(yl), ty - 3, yl, kBlack);
    }
    canvas.text(kLeft + (pw - Canvas::text_width(spec.x_label)) / 2, kHeight - 18, spec.x_label, kBlack);
    canvas.text(6, kTop - 14, spec.y_label, kBlack);

    // Least-squares fit, drawn only when x varies.
    const double n = static_cast<double>(spec.xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < spec.xs.size(); ++i) {
        mx += spec.xs[i];
        my += spec.ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < spec.xs.size(); ++i) {
        sxx += (spec.xs[i] - mx) * (spec.xs[i] - mx);
        sxy += (spec.xs[i] - mx) * (spec.ys[i] - my);
    }
    if (sxx > 0) {
        const double slope = sxy / sxx;
        auto clip_y = [&](double x) { return std::clamp(my + slope * (x - mx), y0, y1); };
        canvas.line(px(x0), py(clip_y(x0)), px(x1), py(clip_y(x1)), Rgb{120, 120, 220});
    }

    for (std::size_t i = 0; i < spec.xs.size(); ++i) {
        const int cx = px(spec.xs[i]), cy = py(spec.ys[i]);
        canvas.fill_rect(cx - 3, cy - 3, cx + 4, cy + 4, Rgb{200, 40, 40});
        if (i < spec.labels.size()) canvas.text(cx + 6, cy - 10, spec.labels[i], kBlack);
    }
    return canvas.image();
}

}  // namespace vlmaudit::render
