#include "vlmaudit/report.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <json.hpp>

#include "vlmaudit/csv.hpp"
#include "vlmaudit/error.hpp"
#include "vlmaudit/image.hpp"
#include "vlmaudit/render.hpp"

namespace vlmaudit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string provenance_timestamp(bool wall_clock) {
    std::time_t t = 0;
    if (wall_clock) {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    } else if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), v);
        if (ec != std::errc() || *ptr != '\0') throw ConfigError("SOURCE_DATE_EPOCH is not an integer");
        t = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const SetScore* AuditReport::find_set_score(Region r, Gender g, Subclass s) const {
    for (const auto& x : set_scores) {
        if (x.region == r && x.gender == g && x.subclass == s) return &x;
    }
    return nullptr;
}

const TrendScore* AuditReport::find_trend(Region r, Gender g) const {
    for (const auto& x : trends) {
        if (x.region == r && x.gender == g) return &x;
    }
    return nullptr;
}

const GenderDifferenceScore* AuditReport::find_gender_difference(Region r, KeywordSet set) const {
    for (const auto& x : gender_differences) {
        if (x.region == r && x.set == set) return &x;
    }
    return nullptr;
}

namespace {

std::vector<KeywordSet> sets_present(const GroupMeanTable& table) {
    std::vector<KeywordSet> out;
    for (KeywordSet set : kAllSets) {
        for (const auto& kw : table.keywords()) {
            if (kw.set != set) continue;
            bool found = false;
            for (Region r : table.regions()) {
                for (Gender g : kAllGenders) found = found || table.find(r, g, kw.text);
            }
            if (found) {
                out.push_back(set);
                break;
            }
        }
    }
    return out;
}

std::string shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string two_decimals(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string gender_label(std::optional<Gender> g) { return g ? std::string(to_string(*g)) : std::string(); }

}  // namespace

AuditReport build_report(const GroupMeanTable& table, AggregationMode mode, const std::vector<RegionSpec>* regions,
                         Provenance provenance) {
    AuditReport report;
    report.mode = mode;
    report.group_means = table;
    report.provenance = std::move(provenance);
    report.warnings = std_warnings(table);

    const auto present = table.regions();
    for (KeywordSet set : sets_present(table)) {
        const auto subs = subclasses_of(set);
        for (Region r : present) {
            for (Gender g : kAllGenders) {
                const auto a = set_sum(table, r, g, set, subs[0], mode);
                const auto b = set_sum(table, r, g, set, subs[1], mode);
                report.set_scores.push_back(a);
                report.set_scores.push_back(b);
                if (set == KeywordSet::Traits) report.trends.push_back(trend(a, b));
            }
            report.gender_differences.push_back(
                gender_difference(*report.find_set_score(r, Gender::Man, subs[0]),
                                  *report.find_set_score(r, Gender::Man, subs[1]),
                                  *report.find_set_score(r, Gender::Woman, subs[0]),
                                  *report.find_set_score(r, Gender::Woman, subs[1])));
        }
        if (regions) {
            std::vector<GenderDifferenceScore> gd;
            for (const auto& x : report.gender_differences) {
                if (x.set == set) gd.push_back(x);
            }
            report.correlations[set] = correlate_with_index(gd, *regions);
        }
    }
    return report;
}

const Table2Row* Table2::find(KeywordSet set, std::optional<Gender> gender, std::string_view type) const {
    for (const auto& row : rows) {
        if (row.set == set && row.gender == gender && row.type == type) return &row;
    }
    return nullptr;
}

std::optional<double> Table2::value(KeywordSet set, std::optional<Gender> gender, std::string_view type,
                                    Region r) const {
    const auto* row = find(set, gender, type);
    if (!row) return std::nullopt;
    auto it = row->values.find(r);
    if (it == row->values.end()) return std::nullopt;
    return it->second;
}

Table2 make_table2(const AuditReport& report) {
    Table2 out;
    out.mode = report.mode;
    const auto present = report.group_means.regions();
    for (Region r : kTable2RegionOrder) {
        if (std::find(present.begin(), present.end(), r) != present.end()) out.regions.push_back(r);
    }
    for (KeywordSet set : kAllSets) {
        if (std::none_of(report.gender_differences.begin(), report.gender_differences.end(),
                         [&](const GenderDifferenceScore& g) { return g.set == set; })) {
            continue;
        }
        for (Gender g : kAllGenders) {
            for (Subclass s : subclasses_of(set)) {
                Table2Row row{set, g, std::string(to_string(s)), {}};
                for (Region r : out.regions) {
                    if (const auto* x = report.find_set_score(r, g, s)) row.values[r] = x->value;
                }
                out.rows.push_back(std::move(row));
            }
            if (set == KeywordSet::Traits) {
                Table2Row row{set, g, "trend", {}};
                for (Region r : out.regions) {
                    if (const auto* x = report.find_trend(r, g)) row.values[r] = x->trend;
                }
                out.rows.push_back(std::move(row));
            }
        }
        Table2Row row{set, std::nullopt, "gender_difference", {}};
        for (Region r : out.regions) {
            if (const auto* x = report.find_gender_difference(r, set)) row.values[r] = x->value;
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

std::string format_table2_csv(const Table2& table) {
    csv::Row header{"set", "gender", "type"};
    for (Region r : table.regions) header.emplace_back(to_string(r));
    std::string out = csv::join(header) + "\n";
    for (const auto& row : table.rows) {
        csv::Row line{std::string(to_string(row.set)), gender_label(row.gender), row.type};
        for (Region r : table.regions) {
            auto it = row.values.find(r);
            if (it == row.values.end()) {
                line.emplace_back();
            } else {
                line.push_back(table.mode == AggregationMode::Reproduce ? two_decimals(it->second)
                                                                        : shortest(it->second));
            }
        }
        out += csv::join(line) + "\n";
    }
    return out;
}

Table2 parse_table2_csv(std::string_view text) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw LoadError("empty summary CSV");
    const auto& header = rows.front();
    if (header.size() < 3 || header[0] != "set" || header[1] != "gender" || header[2] != "type") {
        throw LoadError("summary CSV header must start with set,gender,type", 1);
    }
    Table2 out;
    for (std::size_t c = 3; c < header.size(); ++c) {
        auto r = parse_region(header[c]);
        if (!r) throw LoadError("unknown region column '" + header[c] + "'", 1);
        out.regions.push_back(*r);
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != header.size()) throw LoadError("malformed summary row", i + 1);
        auto set = parse_keyword_set(row[0]);
        if (!set) throw LoadError("unknown set '" + row[0] + "'", i + 1);
        Table2Row parsed{*set, std::nullopt, row[2], {}};
        if (!row[1].empty()) {
            auto g = parse_gender(row[1]);
            if (!g) throw LoadError("unknown gender '" + row[1] + "'", i + 1);
            parsed.gender = *g;
        }
        for (std::size_t c = 3; c < row.size(); ++c) {
            if (row[c].empty()) continue;
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(row[c].data(), row[c].data() + row[c].size(), v);
            if (ec != std::errc() || ptr != row[c].data() + row[c].size()) {
                throw LoadError("bad value '" + row[c] + "'", i + 1);
            }
            parsed.values[out.regions[c - 3]] = v;
        }
        out.rows.push_back(std::move(parsed));
    }
    return out;
}

std::string format_table2_text(const Table2& table) {
    std::string out;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-12s %-6s %-18s", "set", "gender", "type");
    out += buf;
    for (Region r : table.regions) {
        std::snprintf(buf, sizeof(buf), "%8s", std::string(to_string(r)).c_str());
        out += buf;
    }
    out += "\n";
    for (const auto& row : table.rows) {
        std::snprintf(buf, sizeof(buf), "%-12s %-6s %-18s", std::string(to_string(row.set)).c_str(),
                      gender_label(row.gender).c_str(), row.type.c_str());
        out += buf;
        for (Region r : table.regions) {
            auto it = row.values.find(r);
            if (it == row.values.end()) {
                std::snprintf(buf, sizeof(buf), "%8s", "-");
            } else if (table.mode == AggregationMode::Reproduce) {
                std::snprintf(buf, sizeof(buf), "%8s", two_decimals(it->second).c_str());
            } else {
                std::snprintf(buf, sizeof(buf), "%8.4f", it->second);
            }
            out += buf;
        }
        out += "\n";
    }
    return out;
}

std::string format_scatter_csv(const CorrelationResult& result) {
    std::string out = "region,gggi,gender_difference\n";
    for (std::size_t i = 0; i < result.pairs.size(); ++i) {
        const std::string label = i < result.labels.size() ? result.labels[i] : std::string();
        out += csv::join({label, shortest(result.pairs[i].first), shortest(result.pairs[i].second)}) + "\n";
    }
    return out;
}

std::string report_json(const AuditReport& report) {
    ojson j;
    const auto& p = report.provenance;
    j["provenance"] = {{"backend", p.backend_name},
                       {"config_hash", p.config_hash},
                       {"timestamp", p.timestamp},
                       {"tool_version", p.tool_version}};
    if (p.seed) j["provenance"]["seed"] = *p.seed;
    j["mode"] = to_string(report.mode);

    auto means = ojson::array();
    for (const auto& [key, stat] : report.group_means.entries()) {
        means.push_back({{"region", to_string(key.region)},
                         {"gender", to_string(key.gender)},
                         {"keyword", key.keyword},
                         {"mean", stat.mean},
                         {"std", stat.std},
                         {"n", stat.n}});
    }
    j["group_means"] = std::move(means);

    auto sets = ojson::array();
    for (const auto& s : report.set_scores) {
        sets.push_back({{"region", to_string(s.region)},
                        {"gender", to_string(s.gender)},
                        {"set", to_string(s.set)},
                        {"subclass", to_string(s.subclass)},
                        {"value", s.value}});
    }
    j["set_scores"] = std::move(sets);

    auto trends = ojson::array();
    for (const auto& t : report.trends) {
        trends.push_back({{"region", to_string(t.region)},
                          {"gender", to_string(t.gender)},
                          {"positive_sum", t.positive_sum},
                          {"negative_sum", t.negative_sum},
                          {"trend", t.trend}});
    }
    j["trends"] = std::move(trends);

    auto gds = ojson::array();
    for (const auto& g : report.gender_differences) {
        gds.push_back({{"region", to_string(g.region)},
                       {"set", to_string(g.set)},
                       {"men_total", g.men_total},
                       {"women_total", g.women_total},
                       {"value", g.value}});
    }
    j["gender_differences"] = std::move(gds);

    auto corr = ojson::object();
    for (const auto& [set, c] : report.correlations) {
        auto pairs = ojson::array();
        for (std::size_t i = 0; i < c.pairs.size(); ++i) {
            pairs.push_back({{"region", i < c.labels.size() ? c.labels[i] : std::string()},
                             {"gggi", c.pairs[i].first},
                             {"gender_difference", c.pairs[i].second}});
        }
        corr[std::string(to_string(set))] = {{"r", c.r}, {"p", c.p}, {"n", c.n}, {"pairs", std::move(pairs)}};
    }
    j["correlations"] = std::move(corr);
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

std::string_view to_string(Format f) {
    switch (f) {
        case Format::Csv: return "csv";
        case Format::Json: return "json";
        case Format::Png: return "png";
    }
    return "?";
}

std::optional<Format> parse_format(std::string_view s) {
    if (s == "csv") return Format::Csv;
    if (s == "json") return Format::Json;
    if (s == "png") return Format::Png;
    return std::nullopt;
}

namespace {

render::HeatmapSpec heatmap_spec(const AuditReport& report, KeywordSet set, Gender g) {
    render::HeatmapSpec spec;
    spec.title = std::string(to_string(set)) + " - " + std::string(to_string(g));
    const auto present = report.group_means.regions();
    std::vector<Region> regions;
    for (Region r : kTable2RegionOrder) {
        if (std::find(present.begin(), present.end(), r) != present.end()) regions.push_back(r);
    }
    for (Region r : regions) spec.col_labels.emplace_back(to_string(r));
    for (const auto& kw : report.group_means.keywords()) {
        if (kw.set != set) continue;
        spec.row_labels.push_back(kw.text);
        for (Region r : regions) {
            const auto* stat = report.group_means.find(r, g, kw.text);
            spec.values.push_back(stat ? stat->mean : std::numeric_limits<double>::quiet_NaN());
        }
    }
    return spec;
}

void write_text(const fs::path& path, const std::string& text) { csv::write_file(path, text); }

}  // namespace

std::vector<fs::path> emit_report(const AuditReport& report, const fs::path& output_dir, const FormatSet& formats) {
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (ec || !fs::is_directory(output_dir)) throw IoError(output_dir.string(), "cannot create output directory");
    const fs::path staging = output_dir / ".incomplete";
    fs::remove_all(staging, ec);
    fs::create_directories(staging, ec);
    if (ec) throw IoError(staging.string(), "cannot create staging directory");

    std::vector<std::string> names;
    try {
        auto put_text = [&](const std::string& name, const std::string& text) {
            write_text(staging / name, text);
            names.push_back(name);
        };
        auto put_png = [&](const std::string& name, const RgbImage& img) {
            write_bytes(staging / name, encode_png(img));
            names.push_back(name);
        };

        if (formats.count(Format::Csv)) {
            put_text("group_means.csv", format_group_means_csv(report.group_means));
            put_text("table2.csv", format_table2_csv(make_table2(report)));
            for (const auto& [set, c] : report.correlations) {
                put_text("scatter_" + std::string(to_string(set)) + ".csv", format_scatter_csv(c));
            }
        }
        if (formats.count(Format::Json)) put_text("report.json", report_json(report));
        if (formats.count(Format::Png)) {
            for (KeywordSet set : kAllSets) {
                if (std::none_of(report.gender_differences.begin(), report.gender_differences.end(),
                                 [&](const GenderDifferenceScore& g) { return g.set == set; })) {
                    continue;
                }
                for (Gender g : kAllGenders) {
                    put_png("heatmap_" + std::string(to_string(set)) + "_" + std::string(to_string(g)) + ".png",
                            render::heatmap(heatmap_spec(report, set, g)));
                }
            }
            for (const auto& [set, c] : report.correlations) {
                render::ScatterSpec spec;
                spec.title = std::string(to_string(set));
                spec.x_label = "gggi";
                spec.y_label = "gender difference";
                for (const auto& [x, y] : c.pairs) {
                    spec.xs.push_back(x);
                    spec.ys.push_back(y);
                }
                spec.labels = c.labels;
                spec.r = c.r;
                spec.p = c.p;
                put_png("scatter_" + std::string(to_string(set)) + ".png", render::scatter(spec));
            }
        }
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }

    std::vector<fs::path> written;
    for (const auto& name : names) {
        const auto target = output_dir / name;
        fs::rename(staging / name, target, ec);
        if (ec) {
            fs::remove_all(staging, ec);
            throw IoError(target.string(), "cannot move artifact into place");
        }
        written.push_back(target);
    }
    fs::remove_all(staging, ec);
    return written;
}

}  // namespace vlmaudit
