#include "vlmaudit/remote_backend.hpp"

#include <httplib.h>
#include <json.hpp>

#include "vlmaudit/error.hpp"
#include "vlmaudit/hash.hpp"

namespace vlmaudit {

using nlohmann::json;

namespace {

std::unique_ptr<httplib::Client> make_client(const std::string& endpoint, double timeout_seconds) {
    auto client = std::make_unique<httplib::Client>(endpoint);
    const auto secs = static_cast<time_t>(timeout_seconds);
    const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
    client->set_connection_timeout(secs, usecs);
    client->set_read_timeout(secs, usecs);
    client->set_write_timeout(secs, usecs);
    return client;
}

std::string error_message(const std::string& body) {
    auto parsed = json::parse(body, nullptr, false);
    if (parsed.is_object() && parsed.contains("error") && parsed["error"].is_string()) {
        return parsed["error"].get<std::string>();
    }
    return body.substr(0, 200);
}

std::vector<std::vector<double>> parse_embeddings(const std::string& name, const std::string& body,
                                                  std::size_t expected) {
    auto parsed = json::parse(body, nullptr, false);
    if (!parsed.is_object() || !parsed.contains("embeddings") || !parsed["embeddings"].is_array()) {
        throw BackendError(name, "malformed embedding response");
    }
    auto out = parsed["embeddings"].get<std::vector<std::vector<double>>>();
    if (out.size() != expected) {
        throw BackendError(name, "expected " + std::to_string(expected) + " embeddings, got " +
                                     std::to_string(out.size()));
    }
    return out;
}

}  // namespace

RemoteBackend::RemoteBackend(std::string endpoint, std::string checkpoint_name, double timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {
    if (endpoint_.empty()) throw ConfigError("pretrained backend needs an endpoint URL");
    info_.kind = BackendKind::Pretrained;
    info_.supports_gradients = true;
    info_.name = "pretrained:" + (checkpoint_name.empty() ? endpoint_ : checkpoint_name);

    auto client = make_client(endpoint_, timeout_seconds_);
    auto res = client->Get("/info");
    if (!res) {
        throw BackendError(info_.name, "cannot reach model sidecar at " + endpoint_ + " (" +
                                           httplib::to_string(res.error()) + ")");
    }
    if (res->status != 200) throw BackendError(info_.name, "/info failed: " + error_message(res->body));
    auto parsed = json::parse(res->body, nullptr, false);
    if (!parsed.is_object() || !parsed.contains("dim") || !parsed["dim"].is_number_unsigned()) {
        throw BackendError(info_.name, "malformed /info response");
    }
    info_.dim = parsed["dim"].get<std::size_t>();
    const std::string served = parsed.value("checkpoint", std::string());
    if (!checkpoint_name.empty() && !served.empty() && served != checkpoint_name) {
        throw ConfigError("sidecar at " + endpoint_ + " serves checkpoint '" + served + "', config asks for '" +
                          checkpoint_name + "'");
    }
    if (checkpoint_name.empty() && !served.empty()) info_.name = "pretrained:" + served;
    if (info_.dim < 2) throw BackendError(info_.name, "sidecar reports embedding dim < 2");
}

std::string RemoteBackend::post(const std::string& path, const std::string& body, int* status) const {
    auto client = make_client(endpoint_, timeout_seconds_);
    auto res = client->Post(path, body, "application/json");
    if (!res) throw BackendError(info_.name, "POST " + path + " failed: " + httplib::to_string(res.error()));
    *status = res->status;
    return res->body;
}

std::vector<std::vector<double>> RemoteBackend::embed_texts(std::span<const std::string> texts) const {
    json req = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    int status = 0;
    auto body = post("/embed/text", req.dump(), &status);
    if (status != 200) throw BackendError(info_.name, "/embed/text: " + error_message(body));
    return parse_embeddings(info_.name, body, texts.size());
}

std::vector<std::vector<double>> RemoteBackend::embed_images(std::span<const std::vector<std::uint8_t>> images) const {
    json encoded = json::array();
    for (const auto& img : images) encoded.push_back(base64_encode(img));
    json req = {{"images", std::move(encoded)}};
    int status = 0;
    auto body = post("/embed/image", req.dump(), &status);
    if (status != 200) throw BackendError(info_.name, "/embed/image: " + error_message(body));
    return parse_embeddings(info_.name, body, images.size());
}

std::vector<double> RemoteBackend::embed_text(std::string_view text) const {
    const std::string t(text);
    return embed_texts(std::span(&t, 1)).front();
}

std::vector<double> RemoteBackend::embed_image(std::span<const std::uint8_t> bytes) const {
    const std::vector<std::uint8_t> img(bytes.begin(), bytes.end());
    return embed_images(std::span(&img, 1)).front();
}

LayerGradients RemoteBackend::layer_gradients(std::span<const std::uint8_t> image, std::string_view text,
                                              std::string_view layer) const {
    json req = {{"image", base64_encode(image)},
                {"text", std::string(text)},
                {"layer", std::string(layer.empty() ? kDefaultLayer : layer)}};
    std::string body;
    int status = 0;
    {
        std::lock_guard lock(gradient_mutex_);
        body = post("/gradients", req.dump(), &status);
    }
    if (status == 422) throw ConfigError("layer selector '" + std::string(layer) + "': " + error_message(body));
    if (status != 200) throw BackendError(info_.name, "/gradients: " + error_message(body));

    auto parsed = json::parse(body, nullptr, false);
    try {
        LayerGradients out;
        const auto grid = parsed.at("grid").get<std::vector<std::size_t>>();
        if (grid.size() != 2) throw BackendError(info_.name, "grid must have two entries");
        out.grid_rows = grid[0];
        out.grid_cols = grid[1];
        out.channels = parsed.at("channels").get<std::size_t>();
        out.has_summary_token = parsed.at("has_summary_token").get<bool>();
        out.similarity = parsed.at("similarity").get<double>();
        const auto acts = parsed.at("activations").get<std::vector<std::vector<double>>>();
        const auto grads = parsed.at("gradients").get<std::vector<std::vector<double>>>();
        if (acts.size() != out.token_count() || grads.size() != out.token_count()) {
            throw BackendError(info_.name, "token count does not match grid");
        }
        out.activations.reserve(out.token_count() * out.channels);
        out.gradients.reserve(out.token_count() * out.channels);
        for (std::size_t t = 0; t < acts.size(); ++t) {
            if (acts[t].size() != out.channels || grads[t].size() != out.channels) {
                throw BackendError(info_.name, "channel count mismatch at token " + std::to_string(t));
            }
            out.activations.insert(out.activations.end(), acts[t].begin(), acts[t].end());
            out.gradients.insert(out.gradients.end(), grads[t].begin(), grads[t].end());
        }
        return out;
    } catch (const json::exception& e) {
        throw BackendError(info_.name, std::string("malformed /gradients response: ") + e.what());
    }
}

BackendPtr make_backend(const BackendConfig& config) {
    switch (config.kind) {
        case BackendKind::Mock:
            return make_mock_backend(config.seed, config.dim, config.planted_associations);
        case BackendKind::PatternedMock:
            return make_patterned_backend(config.region, config.dim, config.patch_grid, config.seed);
        case BackendKind::Pretrained:
            return std::make_shared<RemoteBackend>(config.endpoint, config.checkpoint_name, config.timeout_seconds);
    }
    throw ConfigError("unknown backend kind");
}

}  // namespace vlmaudit
