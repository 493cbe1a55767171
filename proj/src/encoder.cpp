#include "vlmaudit/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "vlmaudit/embedding_cache.hpp"
#include "vlmaudit/error.hpp"
#include "vlmaudit/hash.hpp"

namespace vlmaudit {

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

EmbeddingVector normalized(std::vector<double> values) {
    const double n = l2_norm(values);
    if (!(n > 0.0) || !std::isfinite(n)) throw ComputationError("cannot normalise a zero or non-finite vector");
    for (double& x : values) x /= n;
    return EmbeddingVector{std::move(values)};
}

std::string_view to_string(BackendKind k) {
    switch (k) {
        case BackendKind::Pretrained: return "pretrained";
        case BackendKind::Mock: return "mock";
        case BackendKind::PatternedMock: return "patterned_mock";
    }
    return "?";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
    if (s == "pretrained") return BackendKind::Pretrained;
    if (s == "mock") return BackendKind::Mock;
    if (s == "patterned_mock") return BackendKind::PatternedMock;
    return std::nullopt;
}

std::vector<std::vector<double>> Backend::embed_texts(std::span<const std::string> texts) const {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
}

std::vector<std::vector<double>> Backend::embed_images(std::span<const std::vector<std::uint8_t>> images) const {
    std::vector<std::vector<double>> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(embed_image(img));
    return out;
}

LayerGradients Backend::layer_gradients(std::span<const std::uint8_t>, std::string_view, std::string_view) const {
    throw CapabilityError("backend '" + info().name + "' does not support gradients");
}

namespace {

// Runs fn(batch_index) for every batch on up to `threads` workers. The first
// exception (lowest batch index) is rethrown after all workers finish.
template <typename Fn>
void for_each_batch(std::size_t batches, std::size_t threads, Fn fn) {
    threads = std::max<std::size_t>(1, std::min(threads, batches));
    if (threads <= 1) {
        for (std::size_t b = 0; b < batches; ++b) fn(b);
        return;
    }
    std::vector<std::exception_ptr> errors(batches);
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t b = t; b < batches; b += threads) {
                    try {
                        fn(b);
                    } catch (...) {
                        errors[b] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string describe(const std::exception& e) { return e.what(); }

}  // namespace

std::string text_cache_key(const Prompt& p) { return "text:" + p.full_text; }

EmbeddingBatch encode_texts(const std::vector<Prompt>& prompts, const Backend& backend, const EncodeOptions& options) {
    const auto& name = backend.info().name;
    EmbeddingBatch out;
    out.backend_name = name;
    out.ids.reserve(prompts.size());
    for (const auto& p : prompts) out.ids.push_back(p.id());
    out.vectors.resize(prompts.size());

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        if (options.cache) {
            if (auto hit = options.cache->get(name, text_cache_key(prompts[i]))) {
                out.vectors[i] = EmbeddingVector{std::move(*hit)};
                continue;
            }
        }
        todo.push_back(i);
    }

    const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
    const std::size_t batches = (todo.size() + batch_size - 1) / batch_size;
    for_each_batch(batches, options.threads, [&](std::size_t b) {
        const std::size_t begin = b * batch_size;
        const std::size_t end = std::min(todo.size(), begin + batch_size);
        std::vector<std::string> texts;
        for (std::size_t k = begin; k < end; ++k) texts.push_back(prompts[todo[k]].full_text);
        std::vector<std::vector<double>> raw;
        try {
            raw = backend.embed_texts(texts);
            if (raw.size() != texts.size()) throw ComputationError("backend returned wrong batch size");
        } catch (const std::exception&) {
            // Re-run item by item to name the failing prompt.
            raw.clear();
            for (std::size_t k = begin; k < end; ++k) {
                try {
                    raw.push_back(backend.embed_text(prompts[todo[k]].full_text));
                } catch (const std::exception& e) {
                    throw BackendError(name, "prompt '" + prompts[todo[k]].id() + "': " + describe(e));
                }
            }
        }
        for (std::size_t k = begin; k < end; ++k) {
            const auto& prompt = prompts[todo[k]];
            try {
                out.vectors[todo[k]] = normalized(std::move(raw[k - begin]));
            } catch (const std::exception& e) {
                throw BackendError(name, "prompt '" + prompt.id() + "': " + describe(e));
            }
        }
    });

    if (options.cache) {
        for (std::size_t i : todo) options.cache->put(name, text_cache_key(prompts[i]), out.vectors[i].values);
    }
    const std::size_t dim = out.dim();
    for (const auto& v : out.vectors) {
        if (v.dim() != dim) throw BackendError(name, "inconsistent embedding dimensions in text batch");
    }
    return out;
}

ImageEncoding encode_images(const std::vector<ImageRecord>& records, const Backend& backend,
                            const EncodeOptions& options) {
    const auto& name = backend.info().name;
    std::vector<std::optional<EmbeddingVector>> vectors(records.size());
    std::vector<std::optional<std::string>> errors(records.size());

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (options.cache) {
            if (auto hit = options.cache->get(name, records[i].id)) {
                vectors[i] = EmbeddingVector{std::move(*hit)};
                continue;
            }
        }
        todo.push_back(i);
    }

    const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
    const std::size_t batches = (todo.size() + batch_size - 1) / batch_size;
    for_each_batch(batches, options.threads, [&](std::size_t b) {
        const std::size_t begin = b * batch_size;
        const std::size_t end = std::min(todo.size(), begin + batch_size);
        std::vector<std::vector<std::uint8_t>> payloads;
        std::vector<std::size_t> members;
        for (std::size_t k = begin; k < end; ++k) {
            const auto& rec = records[todo[k]];
            try {
                auto bytes = read_bytes(rec.file_path);
                decode_png(bytes);
                payloads.push_back(std::move(bytes));
                members.push_back(todo[k]);
            } catch (const std::exception& e) {
                std::string msg = "record '" + rec.id + "': unreadable image " + rec.file_path.string() + " (" +
                                  describe(e) + ")";
                if (!options.lenient) throw IoError(rec.file_path.string(), "record '" + rec.id + "': unreadable image");
                errors[todo[k]] = std::move(msg);
            }
        }
        std::vector<std::vector<double>> raw;
        try {
            raw = backend.embed_images(payloads);
            if (raw.size() != payloads.size()) throw ComputationError("backend returned wrong batch size");
        } catch (const std::exception&) {
            raw.clear();
            for (std::size_t k = 0; k < payloads.size(); ++k) {
                try {
                    raw.push_back(backend.embed_image(payloads[k]));
                } catch (const std::exception& e) {
                    if (!options.lenient) {
                        throw BackendError(name, "record '" + records[members[k]].id + "': " + describe(e));
                    }
                    errors[members[k]] = "record '" + records[members[k]].id + "': " + describe(e);
                    raw.emplace_back();
                }
            }
        }
        for (std::size_t k = 0; k < members.size(); ++k) {
            if (errors[members[k]]) continue;
            try {
                vectors[members[k]] = normalized(std::move(raw[k]));
            } catch (const std::exception& e) {
                throw BackendError(name, "record '" + records[members[k]].id + "': " + describe(e));
            }
        }
    });

    ImageEncoding out;
    out.batch.backend_name = name;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (vectors[i]) {
            out.batch.ids.push_back(records[i].id);
            out.batch.vectors.push_back(*vectors[i]);
        } else if (errors[i]) {
            out.failures.push_back({records[i].id, *errors[i]});
        }
    }
    if (options.cache) {
        for (std::size_t i : todo) {
            if (vectors[i]) options.cache->put(name, records[i].id, vectors[i]->values);
        }
    }
    const std::size_t dim = out.batch.dim();
    for (const auto& v : out.batch.vectors) {
        if (v.dim() != dim) throw BackendError(name, "inconsistent embedding dimensions in image batch");
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// Standard normal vector from a 64-bit key. Box-Muller on raw mt19937_64
// output; std::normal_distribution is implementation-defined and would
// break cross-platform determinism.
std::vector<double> gaussian_vector(std::uint64_t key, std::size_t dim) {
    std::mt19937_64 rng(key);
    auto open_unit = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; i += 2) {
        const double r = std::sqrt(-2.0 * std::log(open_unit()));
        const double theta = 6.283185307179586 * open_unit();
        v[i] = r * std::cos(theta);
        if (i + 1 < dim) v[i + 1] = r * std::sin(theta);
    }
    return v;
}

std::uint64_t derive_key(std::string_view domain, std::uint64_t seed, std::string_view content) {
    std::string material(domain);
    material += '\x1f';
    material += std::to_string(seed);
    material += '\x1f';
    material += content;
    return digest_prefix64(sha256(material));
}

void remove_component(std::vector<double>& v, const std::vector<double>& unit) {
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * unit[i];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * unit[i];
}

void scale_to_unit(std::vector<double>& v) {
    const double n = l2_norm(v);
    if (!(n > 0.0)) throw ComputationError("degenerate mock vector");
    for (double& x : v) x /= n;
}

std::string plants_fingerprint(const std::vector<PlantedAssociation>& plants) {
    std::string material;
    for (const auto& p : plants) {
        material += p.content_tag + '\x1f' + p.prompt_substring + '\x1f' + std::to_string(p.margin) + '\x1e';
    }
    const auto digest = sha256(material);
    return to_hex(std::span(digest).first(4));
}

}  // namespace

MockBackend::MockBackend(std::uint64_t seed, std::size_t dim, std::vector<PlantedAssociation> plants)
    : seed_(seed), plants_(std::move(plants)) {
    if (dim < 2) throw ConfigError("mock backend dim must be >= 2, got " + std::to_string(dim));
    if (plants_.size() + 1 >= dim) throw ConfigError("mock backend dim too small for the planted associations");
    info_.dim = dim;
    info_.kind = BackendKind::Mock;
    info_.supports_gradients = false;
    info_.name = "mock-s" + std::to_string(seed) + "-d" + std::to_string(dim);
    if (!plants_.empty()) info_.name += "-p" + plants_fingerprint(plants_);

    std::map<std::string, double> weight_by_tag;
    for (std::size_t j = 0; j < plants_.size(); ++j) {
        const auto& p = plants_[j];
        if (p.content_tag.empty() || p.prompt_substring.empty()) {
            throw ConfigError("planted association needs a content tag and a prompt substring");
        }
        const double a = p.margin / kPlantTextWeight;
        weight_by_tag[p.content_tag] += a * a;
        if (weight_by_tag[p.content_tag] >= 1.0) {
            throw ConfigError("planted margins for tag '" + p.content_tag + "' are too large to realise");
        }
        auto dir = gaussian_vector(derive_key("plant", seed, std::to_string(j) + '\x1f' + p.content_tag + '\x1f' +
                                                                    p.prompt_substring),
                                   dim);
        for (const auto& prev : directions_) remove_component(dir, prev);
        scale_to_unit(dir);
        directions_.push_back(std::move(dir));
    }
}

std::vector<double> MockBackend::base_vector(std::string_view domain, std::string_view key) const {
    auto v = gaussian_vector(derive_key(domain, seed_, key), info_.dim);
    for (const auto& d : directions_) remove_component(v, d);
    scale_to_unit(v);
    return v;
}

std::vector<double> MockBackend::embed_text(std::string_view text) const {
    auto v = base_vector("text", to_hex(sha256(text)));
    std::vector<std::size_t> matches;
    for (std::size_t j = 0; j < plants_.size(); ++j) {
        if (text.find(plants_[j].prompt_substring) != std::string_view::npos) matches.push_back(j);
    }
    if (matches.empty()) return v;
    const double planted = kPlantTextWeight * kPlantTextWeight * static_cast<double>(matches.size());
    if (planted >= 1.0) {
        throw BackendError(info_.name, "text matches too many planted associations: '" + std::string(text) + "'");
    }
    const double keep = std::sqrt(1.0 - planted);
    for (double& x : v) x *= keep;
    for (std::size_t j : matches) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += kPlantTextWeight * directions_[j][i];
    }
    return v;
}

std::vector<double> MockBackend::embed_image(std::span<const std::uint8_t> bytes) const {
    auto v = base_vector("image", to_hex(sha256(bytes)));
    if (plants_.empty()) return v;
    const auto tags = content_tags(bytes);
    std::vector<std::pair<std::size_t, double>> shifts;
    double planted = 0.0;
    for (std::size_t j = 0; j < plants_.size(); ++j) {
        if (std::find(tags.begin(), tags.end(), plants_[j].content_tag) == tags.end()) continue;
        const double a = plants_[j].margin / kPlantTextWeight;
        shifts.emplace_back(j, a);
        planted += a * a;
    }
    if (shifts.empty()) return v;
    if (planted >= 1.0) throw BackendError(info_.name, "image tags request planted margins too large to realise");
    const double keep = std::sqrt(1.0 - planted);
    for (double& x : v) x *= keep;
    for (auto [j, a] : shifts) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += a * directions_[j][i];
    }
    return v;
}

std::shared_ptr<MockBackend> make_mock_backend(std::uint64_t seed, std::size_t dim,
                                               std::vector<PlantedAssociation> plants) {
    return std::make_shared<MockBackend>(seed, dim, std::move(plants));
}

// ---------------------------------------------------------------------------

PixelRect patch_pixels(int image_width, int image_height, int grid, int r, int c) {
    auto edge = [grid](int extent, int k) {
        return static_cast<int>((static_cast<long long>(extent) * k) / grid);
    };
    return {edge(image_width, c), edge(image_height, r), edge(image_width, c + 1), edge(image_height, r + 1)};
}

PixelRect patch_rect_pixels(int image_width, int image_height, int grid, const PatchRect& rect) {
    const auto first = patch_pixels(image_width, image_height, grid, rect.row, rect.col);
    const auto last = patch_pixels(image_width, image_height, grid, rect.row + rect.rows - 1, rect.col + rect.cols - 1);
    return {first.x0, first.y0, last.x1, last.y1};
}

PatternedBackend::PatternedBackend(PatchRect region, std::size_t dim, int grid, std::uint64_t seed)
    : region_(region), grid_(grid), seed_(seed) {
    if (dim < 2) throw ConfigError("patterned backend dim must be >= 2, got " + std::to_string(dim));
    if (grid < 1) throw ConfigError("patch grid must be positive");
    if (region.rows < 1 || region.cols < 1 || region.row < 0 || region.col < 0 || region.row + region.rows > grid ||
        region.col + region.cols > grid) {
        throw ConfigError("patch region (" + std::to_string(region.row) + "," + std::to_string(region.col) + " " +
                          std::to_string(region.rows) + "x" + std::to_string(region.cols) +
                          ") lies outside the " + std::to_string(grid) + "x" + std::to_string(grid) + " grid");
    }
    info_.dim = dim;
    info_.kind = BackendKind::PatternedMock;
    info_.supports_gradients = true;
    info_.name = "patterned-s" + std::to_string(seed) + "-d" + std::to_string(dim) + "-g" + std::to_string(grid) +
                 "-r" + std::to_string(region.row) + "." + std::to_string(region.col) + "." +
                 std::to_string(region.rows) + "x" + std::to_string(region.cols);

    // Channel 0 carries only the bias; features and text live on the rest.
    weights_ = gaussian_vector(derive_key("patterned-weights", seed, ""), dim * 3);
    for (double& w : weights_) w = 1.5 * std::abs(w);
    for (int ch = 0; ch < 3; ++ch) weights_[ch] = 0.0;
    bias_.assign(dim, 0.0);
    bias_[0] = kBiasScale * std::sqrt(static_cast<double>(dim));
}

PatternedBackend::Forward PatternedBackend::forward(const RgbImage& image) const {
    if (image.width < grid_ || image.height < grid_) {
        throw BackendError(info_.name, "image smaller than the patch grid");
    }
    const std::size_t C = info_.dim;
    const std::size_t N = static_cast<std::size_t>(grid_) * grid_;
    Forward f;
    f.patch_acts.assign(N * C, 0.0);
    f.raw = bias_;
    std::vector<double> pooled(C, 0.0);
    for (int r = 0; r < grid_; ++r) {
        for (int c = 0; c < grid_; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * grid_ + c;
            const auto px = patch_pixels(image.width, image.height, grid_, r, c);
            double mean[3] = {0.0, 0.0, 0.0};
            for (int y = px.y0; y < px.y1; ++y) {
                for (int x = px.x0; x < px.x1; ++x) {
                    const auto* rgb = image.at(x, y);
                    for (int ch = 0; ch < 3; ++ch) mean[ch] += rgb[ch];
                }
            }
            const double count = static_cast<double>(px.width()) * px.height() * 255.0;
            for (double& m : mean) m /= count;
            double* act = &f.patch_acts[p * C];
            for (std::size_t k = 0; k < C; ++k) {
                const double* w = &weights_[k * 3];
                act[k] = std::tanh(w[0] * mean[0] + w[1] * mean[1] + w[2] * mean[2]);
            }
            if (region_.contains(r, c)) {
                for (std::size_t k = 0; k < C; ++k) pooled[k] += act[k];
            }
        }
    }
    for (std::size_t k = 0; k < C; ++k) f.raw[k] += pooled[k] / static_cast<double>(N);
    return f;
}

std::vector<double> PatternedBackend::similarity_gradient(const std::vector<double>& raw,
                                                          const std::vector<double>& text,
                                                          double* similarity) const {
    // S = <e, t> / |e| with |t| = 1  =>  dS/de = t / |e| - S e / |e|^2
    const double n = l2_norm(raw);
    if (!(n > 0.0)) throw BackendError(info_.name, "zero image embedding");
    double dot = 0.0;
    for (std::size_t k = 0; k < raw.size(); ++k) dot += raw[k] * text[k];
    const double s = dot / n;
    std::vector<double> g(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) g[k] = text[k] / n - s * raw[k] / (n * n);
    if (similarity) *similarity = s;
    return g;
}

std::vector<double> PatternedBackend::embed_text(std::string_view text) const {
    auto v = gaussian_vector(derive_key("text", seed_, to_hex(sha256(text))), info_.dim);
    for (double& x : v) x = std::abs(x);
    v[0] = 0.0;
    scale_to_unit(v);
    return v;
}

std::vector<double> PatternedBackend::embed_pixels(const RgbImage& image) const { return forward(image).raw; }

std::vector<double> PatternedBackend::embed_image(std::span<const std::uint8_t> bytes) const {
    RgbImage image;
    try {
        image = decode_png(bytes).image;
    } catch (const ComputationError& e) {
        throw BackendError(info_.name, e.what());
    }
    return embed_pixels(image);
}

double PatternedBackend::similarity(const RgbImage& image, std::string_view text) const {
    double s = 0.0;
    similarity_gradient(forward(image).raw, embed_text(text), &s);
    return s;
}

std::vector<double> PatternedBackend::pixel_gradient(const RgbImage& image, std::string_view text) const {
    const auto f = forward(image);
    const auto g = similarity_gradient(f.raw, embed_text(text), nullptr);
    const std::size_t C = info_.dim;
    const double N = static_cast<double>(grid_) * grid_;
    std::vector<double> out(image.pixels.size(), 0.0);
    for (int r = region_.row; r < region_.row + region_.rows; ++r) {
        for (int c = region_.col; c < region_.col + region_.cols; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * grid_ + c;
            const auto px = patch_pixels(image.width, image.height, grid_, r, c);
            const double count = static_cast<double>(px.width()) * px.height() * 255.0;
            // dS/dm_p[ch] = sum_k g_k / N * (1 - a_pk^2) * W[k][ch]
            double dm[3] = {0.0, 0.0, 0.0};
            for (std::size_t k = 0; k < C; ++k) {
                const double a = f.patch_acts[p * C + k];
                const double common = g[k] / N * (1.0 - a * a);
                for (int ch = 0; ch < 3; ++ch) dm[ch] += common * weights_[k * 3 + ch];
            }
            for (int y = px.y0; y < px.y1; ++y) {
                for (int x = px.x0; x < px.x1; ++x) {
                    const std::size_t base = (static_cast<std::size_t>(y) * image.width + x) * 3;
                    for (int ch = 0; ch < 3; ++ch) out[base + ch] = dm[ch] / count;
                }
            }
        }
    }
    return out;
}

LayerGradients PatternedBackend::layer_gradients(std::span<const std::uint8_t> bytes, std::string_view text,
                                                 std::string_view layer) const {
    const bool final_layer = layer.empty() || layer == kDefaultLayer;
    if (!final_layer && layer != "patch_embed") {
        throw ConfigError("layer selector '" + std::string(layer) +
                          "' matches no layer of the patterned backend (available: final, patch_embed)");
    }
    RgbImage image;
    try {
        image = decode_png(bytes).image;
    } catch (const ComputationError& e) {
        throw BackendError(info_.name, e.what());
    }
    const auto f = forward(image);
    LayerGradients out;
    const auto g = similarity_gradient(f.raw, embed_text(text), &out.similarity);
    const std::size_t C = info_.dim;
    const std::size_t N = static_cast<std::size_t>(grid_) * grid_;
    out.grid_rows = out.grid_cols = static_cast<std::size_t>(grid_);
    out.channels = C;
    out.has_summary_token = final_layer;
    const std::size_t offset = final_layer ? 1 : 0;
    out.activations.assign((N + offset) * C, 0.0);
    out.gradients.assign((N + offset) * C, 0.0);
    if (final_layer) {
        for (std::size_t k = 0; k < C; ++k) {
            out.activations[k] = f.raw[k] - bias_[k];
            out.gradients[k] = g[k];
        }
    }
    for (std::size_t p = 0; p < N; ++p) {
        const int r = static_cast<int>(p) / grid_;
        const int c = static_cast<int>(p) % grid_;
        if (!region_.contains(r, c)) continue;
        double* act = &out.activations[(p + offset) * C];
        double* grad = &out.gradients[(p + offset) * C];
        for (std::size_t k = 0; k < C; ++k) {
            act[k] = f.patch_acts[p * C + k];
            grad[k] = g[k] / static_cast<double>(N);
        }
    }
    if (!final_layer) {
        // Pre-gate activations exist everywhere; their gradient is gated.
        for (std::size_t p = 0; p < N; ++p) {
            for (std::size_t k = 0; k < C; ++k) out.activations[p * C + k] = f.patch_acts[p * C + k];
        }
    }
    return out;
}

std::shared_ptr<PatternedBackend> make_patterned_backend(PatchRect region, std::size_t dim, int grid,
                                                         std::uint64_t seed) {
    return std::make_shared<PatternedBackend>(region, dim, grid, seed);
}

}  // namespace vlmaudit
