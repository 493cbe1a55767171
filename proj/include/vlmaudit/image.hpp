#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vlmaudit {

// 8-bit RGB raster, row-major, interleaved.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* at(int x, int y) const {
        return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    }
    bool operator==(const RgbImage&) const = default;
};

using PngText = std::map<std::string, std::string>;

struct DecodedPng {
    RgbImage image;
    PngText text;
};

bool looks_like_png(std::span<const std::uint8_t> bytes);

// Decodes any PNG colour type to 8-bit RGB (alpha is dropped, 16-bit is
// stripped). Throws ComputationError on malformed data.
DecodedPng decode_png(std::span<const std::uint8_t> bytes);

// Reads only the header and the text chunks preceding the image data.
struct PngInfo {
    int width = 0;
    int height = 0;
    PngText text;
};
std::optional<PngInfo> probe_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const RgbImage& image, const PngText& text = {});

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Content tags recognised by the mock backend's planted associations are
// stored in the "tags" text chunk as a comma-separated list.
inline constexpr const char* kTagsChunk = "tags";
std::vector<std::string> content_tags(std::span<const std::uint8_t> png_bytes);

// Deterministic smooth-noise test image.
RgbImage synthetic_image(std::uint64_t seed, int width, int height);

}  // namespace vlmaudit
