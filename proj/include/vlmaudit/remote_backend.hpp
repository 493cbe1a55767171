#pragma once

#include <mutex>
#include <string>

#include "vlmaudit/encoder.hpp"

namespace vlmaudit {

// Pretrained dual encoder served by a model sidecar over HTTP/JSON. The
// checkpoint is whatever the sidecar loaded; `checkpoint_name` is checked
// against the sidecar's report when non-empty.
//
// Protocol (all bodies JSON, images base64-encoded file bytes):
//   GET  /info            -> {"name", "checkpoint", "dim", "patch_grid": [rows, cols]}
//   POST /embed/text      {"texts": [..]}   -> {"embeddings": [[..], ..]}
//   POST /embed/image     {"images": [..]}  -> {"embeddings": [[..], ..]}
//   POST /gradients       {"image", "text", "layer"}
//        -> {"grid": [rows, cols], "channels", "has_summary_token",
//            "activations": [[..] per token], "gradients": [[..] per token],
//            "similarity"}
// Errors use non-2xx status with {"error": message}; status 422 on
// /gradients means the layer selector matched nothing.
class RemoteBackend final : public Backend {
public:
    RemoteBackend(std::string endpoint, std::string checkpoint_name, double timeout_seconds = 120.0);

    const BackendInfo& info() const override { return info_; }
    std::vector<double> embed_text(std::string_view text) const override;
    std::vector<double> embed_image(std::span<const std::uint8_t> bytes) const override;
    std::vector<std::vector<double>> embed_texts(std::span<const std::string> texts) const override;
    std::vector<std::vector<double>> embed_images(std::span<const std::vector<std::uint8_t>> images) const override;
    LayerGradients layer_gradients(std::span<const std::uint8_t> image, std::string_view text,
                                   std::string_view layer) const override;

    const std::string& endpoint() const { return endpoint_; }

private:
    std::string post(const std::string& path, const std::string& body, int* status) const;

    std::string endpoint_;
    double timeout_seconds_;
    BackendInfo info_;
    // Gradient-mode calls are serialised; inference calls are not.
    mutable std::mutex gradient_mutex_;
};

}  // namespace vlmaudit
