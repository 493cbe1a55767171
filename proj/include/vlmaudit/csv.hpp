#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vlmaudit::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader. Quoted fields may contain commas, doubled quotes and
// newlines. A trailing newline does not produce an empty row; blank lines
// are skipped.
struct Table {
    Row header;
    std::vector<Row> rows;
    // 1-based file line of each row's first line (header is line 1).
    std::vector<std::size_t> lines;
};

std::vector<Row> parse(std::string_view text);
Table read_table(const std::filesystem::path& path);

std::string escape(std::string_view field);
std::string join(const Row& fields);

// Index of a header column, or throws LoadError naming the column.
std::size_t column(const Row& header, std::string_view name);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace vlmaudit::csv
