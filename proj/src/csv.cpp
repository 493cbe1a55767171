#include "vlmaudit/csv.hpp"

#include <fstream>
#include <sstream>

#include "vlmaudit/error.hpp"

namespace vlmaudit::csv {

namespace {

struct ParsedRows {
    std::vector<Row> rows;
    std::vector<std::size_t> lines;
};

ParsedRows parse_with_lines(std::string_view text) {
    ParsedRows out;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t row_line = 1;

    auto end_row = [&] {
        if (field_started || !row.empty() || !field.empty()) {
            row.push_back(std::move(field));
            out.rows.push_back(std::move(row));
            out.lines.push_back(row_line);
        }
        row.clear();
        field.clear();
        field_started = false;
    };

    // Skip a UTF-8 byte order mark.
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                ++line;
                row_line = line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw LoadError("unterminated quoted field", row_line);
    end_row();
    return out;
}

}  // namespace

std::vector<Row> parse(std::string_view text) { return parse_with_lines(text).rows; }

Table read_table(const std::filesystem::path& path) {
    auto parsed = parse_with_lines(read_file(path));
    Table table;
    if (parsed.rows.empty()) throw LoadError("missing header in " + path.string());
    table.header = std::move(parsed.rows.front());
    table.rows.assign(std::make_move_iterator(parsed.rows.begin() + 1),
                      std::make_move_iterator(parsed.rows.end()));
    table.lines.assign(parsed.lines.begin() + 1, parsed.lines.end());
    return table;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string join(const Row& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(fields[i]);
    }
    return out;
}

std::size_t column(const Row& header, std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw LoadError("missing column '" + std::string(name) + "'", 1);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace vlmaudit::csv
