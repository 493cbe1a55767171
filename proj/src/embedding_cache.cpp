#include "vlmaudit/embedding_cache.hpp"

#include <charconv>
#include <sstream>

#include "vlmaudit/csv.hpp"
#include "vlmaudit/error.hpp"

namespace vlmaudit {

namespace {

constexpr std::string_view kMagic = "# vlmaudit-embedding-cache v1";

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path) {
    EmbeddingCache cache;
    if (!std::filesystem::exists(path)) return cache;
    std::string text = csv::read_file(path);
    const auto first_newline = text.find('\n');
    if (text.substr(0, first_newline) != kMagic) {
        throw LoadError("unsupported embedding cache version in " + path.string(), 1);
    }
    auto rows = csv::parse(std::string_view(text).substr(first_newline + 1));
    if (rows.empty() || rows.front() != csv::Row{"backend", "item_id", "dim", "values"}) {
        throw LoadError("missing embedding cache header in " + path.string(), 2);
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const std::size_t line = i + 2;
        if (row.size() != 4) throw LoadError("malformed embedding cache row", line);
        std::size_t dim = 0;
        auto [p, ec] = std::from_chars(row[2].data(), row[2].data() + row[2].size(), dim);
        if (ec != std::errc() || p != row[2].data() + row[2].size()) throw LoadError("bad dim", line);
        std::vector<double> values;
        values.reserve(dim);
        const char* cur = row[3].data();
        const char* end = cur + row[3].size();
        while (cur < end) {
            while (cur < end && *cur == ' ') ++cur;
            if (cur == end) break;
            double v = 0.0;
            auto [next, err] = std::from_chars(cur, end, v);
            if (err != std::errc()) throw LoadError("bad embedding value", line);
            values.push_back(v);
            cur = next;
        }
        if (values.size() != dim) throw LoadError("embedding length does not match dim", line);
        cache.entries_[{row[0], row[1]}] = std::move(values);
    }
    return cache;
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
    std::lock_guard lock(mutex_);
    std::string out(kMagic);
    out += "\nbackend,item_id,dim,values\n";
    for (const auto& [key, values] : entries_) {
        std::string joined;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) joined.push_back(' ');
            joined += format_double(values[i]);
        }
        out += csv::join({key.first, key.second, std::to_string(values.size()), joined});
        out += '\n';
    }
    csv::write_file(path, out);
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& backend, const std::string& item_id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find({backend, item_id});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::put(const std::string& backend, const std::string& item_id, std::vector<double> values) {
    std::lock_guard lock(mutex_);
    entries_[{backend, item_id}] = std::move(values);
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

}  // namespace vlmaudit
