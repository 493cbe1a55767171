#include "vlmaudit/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "vlmaudit/error.hpp"

namespace vlmaudit {

namespace {

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->bytes.size()) {
        png_error(png, "truncated PNG data");
    }
    std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
    cursor->offset += length;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

void collect_text(png_structp png, png_infop info, PngText& text) {
    png_textp entries = nullptr;
    int count = 0;
    png_get_text(png, info, &entries, &count);
    for (int i = 0; i < count; ++i) {
        text[entries[i].key] = std::string(entries[i].text, entries[i].text_length);
    }
}

// All libpng state lives here so nothing on the C++ stack is skipped by
// longjmp.
struct ReadJob {
    ReadCursor cursor;
    bool header_only = false;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    PngText text;
    char message[256] = {};
};

void on_error(png_structp png, png_const_charp msg) {
    auto* job = static_cast<ReadJob*>(png_get_error_ptr(png));
    if (job) std::snprintf(job->message, sizeof(job->message), "%s", msg);
    png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

bool run_read(ReadJob* job) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, job, on_error, on_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, &job->cursor, read_from_memory);
    png_read_info(png, info);
    job->width = static_cast<int>(png_get_image_width(png, info));
    job->height = static_cast<int>(png_get_image_height(png, info));
    collect_text(png, info, job->text);
    if (job->header_only) {
        png_destroy_read_struct(&png, &info, nullptr);
        return true;
    }

    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != static_cast<png_size_t>(job->width) * 3) {
        png_error(png, "unexpected row layout after RGB conversion");
    }

    job->pixels.resize(static_cast<std::size_t>(job->width) * job->height * 3);
    job->rows.resize(static_cast<std::size_t>(job->height));
    for (int y = 0; y < job->height; ++y) {
        job->rows[y] = job->pixels.data() + static_cast<std::size_t>(y) * job->width * 3;
    }
    png_read_image(png, job->rows.data());
    png_read_end(png, info);
    collect_text(png, info, job->text);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

struct WriteJob {
    const RgbImage* image = nullptr;
    std::vector<std::pair<std::string, std::string>> text;
    std::vector<std::uint8_t> out;
    std::vector<png_text> entries;
    std::vector<png_const_bytep> rows;
    char message[256] = {};
};

void on_write_error(png_structp png, png_const_charp msg) {
    auto* job = static_cast<WriteJob*>(png_get_error_ptr(png));
    if (job) std::snprintf(job->message, sizeof(job->message), "%s", msg);
    png_longjmp(png, 1);
}

bool run_write(WriteJob* job) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, job, on_write_error, on_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, &job->out, write_to_vector, flush_noop);
    const RgbImage& img = *job->image;
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    if (!job->entries.empty()) {
        png_set_text(png, info, job->entries.data(), static_cast<int>(job->entries.size()));
    }
    // Fixed compression settings keep encoded bytes reproducible.
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(job->rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

}  // namespace

bool looks_like_png(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

DecodedPng decode_png(std::span<const std::uint8_t> bytes) {
    if (!looks_like_png(bytes)) throw ComputationError("not a PNG image");
    ReadJob job;
    job.cursor.bytes = bytes;
    if (!run_read(&job)) {
        throw ComputationError(std::string("PNG decode failed: ") + job.message);
    }
    DecodedPng out;
    out.image.width = job.width;
    out.image.height = job.height;
    out.image.pixels = std::move(job.pixels);
    out.text = std::move(job.text);
    return out;
}

std::optional<PngInfo> probe_png(std::span<const std::uint8_t> bytes) {
    if (!looks_like_png(bytes)) return std::nullopt;
    ReadJob job;
    job.cursor.bytes = bytes;
    job.header_only = true;
    if (!run_read(&job)) return std::nullopt;
    return PngInfo{job.width, job.height, std::move(job.text)};
}

std::vector<std::uint8_t> encode_png(const RgbImage& image, const PngText& text) {
    if (image.width <= 0 || image.height <= 0 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
        throw ContractError("encode_png: image buffer does not match its dimensions");
    }
    WriteJob job;
    job.image = &image;
    job.text.assign(text.begin(), text.end());
    for (auto& [key, value] : job.text) {
        png_text entry{};
        entry.compression = PNG_TEXT_COMPRESSION_NONE;
        entry.key = key.data();
        entry.text = value.data();
        entry.text_length = value.size();
        job.entries.push_back(entry);
    }
    job.rows.resize(static_cast<std::size_t>(image.height));
    for (int y = 0; y < image.height; ++y) job.rows[y] = image.at(0, y);
    if (!run_write(&job)) {
        throw ComputationError(std::string("PNG encode failed: ") + job.message);
    }
    return std::move(job.out);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

std::vector<std::string> content_tags(std::span<const std::uint8_t> png_bytes) {
    std::vector<std::string> tags;
    auto info = probe_png(png_bytes);
    if (!info) return tags;
    auto it = info->text.find(kTagsChunk);
    if (it == info->text.end()) return tags;
    std::stringstream ss(it->second);
    std::string tag;
    while (std::getline(ss, tag, ',')) {
        if (!tag.empty()) tags.push_back(tag);
    }
    return tags;
}

RgbImage synthetic_image(std::uint64_t seed, int width, int height) {
    // Sum of a few low-frequency sinusoids per channel with seeded phases.
    std::mt19937_64 rng(seed);
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    constexpr int kWaves = 3;
    double fx[3][kWaves], fy[3][kWaves], ph[3][kWaves];
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < kWaves; ++k) {
            fx[c][k] = 0.5 + 3.0 * unit();
            fy[c][k] = 0.5 + 3.0 * unit();
            ph[c][k] = 6.283185307179586 * unit();
        }
    }
    RgbImage img(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double u = static_cast<double>(x) / width;
            const double v = static_cast<double>(y) / height;
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                for (int k = 0; k < kWaves; ++k) {
                    s += std::sin(6.283185307179586 * (fx[c][k] * u + fy[c][k] * v) + ph[c][k]);
                }
                const double value = 127.5 + 127.5 * (s / kWaves);
                img.at(x, y)[c] = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
            }
        }
    }
    return img;
}

}  // namespace vlmaudit
