#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vlmaudit {

// Embedding cache keyed by (backend name, item id).
//
// On-disk format (UTF-8 CSV, version 1):
//   line 1: `# vlmaudit-embedding-cache v1`
//   line 2: header `backend,item_id,dim,values`
//   rows:   values are space-separated shortest round-trip decimals, so a
//           reload reproduces every double bit for bit.
// Rows are written sorted by (backend, item_id).
class EmbeddingCache {
public:
    static constexpr int kVersion = 1;

    EmbeddingCache() = default;
    EmbeddingCache(EmbeddingCache&& other) noexcept : entries_(std::move(other.entries_)) {}
    EmbeddingCache& operator=(EmbeddingCache&& other) noexcept {
        if (this != &other) {
            std::scoped_lock lock(mutex_, other.mutex_);
            entries_ = std::move(other.entries_);
        }
        return *this;
    }

    // Missing file yields an empty cache; a malformed one throws LoadError.
    static EmbeddingCache load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::optional<std::vector<double>> get(const std::string& backend, const std::string& item_id) const;
    void put(const std::string& backend, const std::string& item_id, std::vector<double> values);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, std::string>, std::vector<double>> entries_;
};

}  // namespace vlmaudit
