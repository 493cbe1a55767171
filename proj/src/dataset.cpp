#include "vlmaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <future>
#include <set>

#include "vlmaudit/csv.hpp"
#include "vlmaudit/error.hpp"
#include "vlmaudit/hash.hpp"
#include "vlmaudit/image.hpp"

namespace vlmaudit {

namespace fs = std::filesystem;

std::string_view to_string(Region r) {
    switch (r) {
        case Region::WANA: return "WANA";
        case Region::NA: return "NA";
        case Region::WE: return "WE";
        case Region::SA: return "SA";
        case Region::SEA: return "SEA";
        case Region::EA: return "EA";
        case Region::EE: return "EE";
        case Region::LA: return "LA";
        case Region::SSA: return "SSA";
    }
    return "?";
}

std::optional<Region> parse_region(std::string_view abbreviation) {
    for (Region r : kAllRegions) {
        if (to_string(r) == abbreviation) return r;
    }
    return std::nullopt;
}

std::string_view to_string(Gender g) { return g == Gender::Man ? "man" : "woman"; }

std::optional<Gender> parse_gender(std::string_view value) {
    if (value == "man") return Gender::Man;
    if (value == "woman") return Gender::Woman;
    return std::nullopt;
}

std::vector<RegionSpec> builtin_region_table() {
    return {
        {"West Asia & North Africa", Region::WANA, "Arabic", {"Egypt", "UAE"}, std::nullopt},
        {"North America", Region::NA, "English", {"USA"}, std::nullopt},
        {"Western Europe", Region::WE, "English", {"UK"}, std::nullopt},
        {"South Asia", Region::SA, "Hindi", {"India"}, std::nullopt},
        {"South East Asia", Region::SEA, "Indonesian", {"Indonesia"}, std::nullopt},
        {"East Asia", Region::EA, "Mandarin Chinese", {"Hong Kong SAR"}, std::nullopt},
        {"Eastern Europe", Region::EE, "Russian", {"Russia"}, std::nullopt},
        {"Latin America", Region::LA, "Spanish", {"Mexico", "Colombia"}, std::nullopt},
        {"Sub Saharan Africa", Region::SSA, "Swahili", {"Kenya", "South Africa"}, std::nullopt},
    };
}

namespace {

std::optional<double> parse_double(std::string_view text) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

std::optional<long long> parse_int(std::string_view text) {
    long long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

}  // namespace

void apply_gggi_overrides(std::vector<RegionSpec>& regions, const fs::path& csv_path) {
    const auto table = csv::read_table(csv_path);
    const auto abbr_col = csv::column(table.header, "abbreviation");
    const auto gggi_col = csv::column(table.header, "gggi");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const auto line = table.lines[i];
        if (row.size() != table.header.size()) throw LoadError("expected " + std::to_string(table.header.size()) + " fields", line);
        auto region = parse_region(row[abbr_col]);
        if (!region) throw LoadError("unknown region abbreviation '" + row[abbr_col] + "'", line);
        auto it = std::find_if(regions.begin(), regions.end(),
                               [&](const RegionSpec& s) { return s.abbreviation == *region; });
        if (it == regions.end()) continue;
        if (row[gggi_col].empty()) continue;
        auto value = parse_double(row[gggi_col]);
        if (!value || *value < 0.0 || *value > 1.0) {
            throw LoadError("gggi '" + row[gggi_col] + "' is not a number in [0, 1]", line);
        }
        it->gggi = *value;
    }
}

const RegionSpec& find_region(const std::vector<RegionSpec>& regions, Region r) {
    for (const auto& spec : regions) {
        if (spec.abbreviation == r) return spec;
    }
    throw ContractError("region " + std::string(to_string(r)) + " missing from region table");
}

Dataset::Dataset(std::vector<ImageRecord> records) : records_(std::move(records)) {
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& rec = records_[i];
        if (!index_.emplace(rec.id, i).second) throw ContractError("duplicate record id '" + rec.id + "'");
        ++cells_[{rec.region, rec.gender}];
    }
}

std::size_t Dataset::cell_count(Region r, Gender g) const {
    auto it = cells_.find({r, g});
    return it == cells_.end() ? 0 : it->second;
}

const ImageRecord* Dataset::find(std::string_view id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

Dataset load_manifest(const fs::path& path) {
    const auto table = csv::read_table(path);
    std::array<std::size_t, kManifestColumns.size()> col{};
    for (std::size_t i = 0; i < kManifestColumns.size(); ++i) col[i] = csv::column(table.header, kManifestColumns[i]);
    const fs::path base = path.parent_path();

    std::vector<ImageRecord> records;
    records.reserve(table.rows.size());
    std::set<std::string, std::less<>> seen;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const auto line = table.lines[i];
        if (row.size() != table.header.size()) {
            throw LoadError("malformed row: expected " + std::to_string(table.header.size()) + " fields, got " +
                                std::to_string(row.size()),
                            line);
        }
        ImageRecord rec;
        rec.id = row[col[0]];
        if (rec.id.empty()) throw LoadError("empty id", line);
        if (!seen.insert(rec.id).second) throw LoadError("duplicate id '" + rec.id + "'", line);
        auto region = parse_region(row[col[1]]);
        if (!region) throw LoadError("unknown region '" + row[col[1]] + "'", line);
        rec.region = *region;
        auto gender = parse_gender(row[col[2]]);
        if (!gender) throw LoadError("unknown gender '" + row[col[2]] + "'", line);
        rec.gender = *gender;
        rec.query_term = row[col[3]];
        rec.source_url = row[col[4]];
        if (!row[col[5]].empty()) {
            fs::path p(row[col[5]]);
            rec.file_path = p.is_absolute() ? p : base / p;
        }
        auto width = parse_int(row[col[6]]);
        auto height = parse_int(row[col[7]]);
        if (!width || !height || *width < 0 || *height < 0) {
            throw LoadError("width/height must be non-negative integers", line);
        }
        rec.width = static_cast<int>(*width);
        rec.height = static_cast<int>(*height);
        if (!rec.file_path.empty() && (rec.width < 1 || rec.height < 1)) {
            throw LoadError("materialized record '" + rec.id + "' needs width and height >= 1", line);
        }
        records.push_back(std::move(rec));
    }
    return Dataset(std::move(records));
}

void write_manifest(const Dataset& ds, const fs::path& path) {
    const fs::path base = fs::absolute(path).parent_path().lexically_normal();
    std::string out = csv::join(csv::Row(kManifestColumns.begin(), kManifestColumns.end())) + "\n";
    for (const auto& rec : ds.records()) {
        std::string file;
        if (!rec.file_path.empty()) {
            const fs::path abs = fs::absolute(rec.file_path).lexically_normal();
            const fs::path rel = abs.lexically_relative(base);
            const bool inside = !rel.empty() && *rel.begin() != "..";
            file = (inside ? rel : abs).generic_string();
        }
        out += csv::join({rec.id, std::string(to_string(rec.region)), std::string(to_string(rec.gender)),
                          rec.query_term, rec.source_url, file, std::to_string(rec.width),
                          std::to_string(rec.height)});
        out += "\n";
    }
    csv::write_file(path, out);
}

std::vector<CellReport> ValidationReport::failing_cells() const {
    std::vector<CellReport> out;
    std::copy_if(cells.begin(), cells.end(), std::back_inserter(out), [](const CellReport& c) { return !c.conformant; });
    return out;
}

ValidationReport validate_dataset(const Dataset& ds, std::size_t expected_per_cell) {
    if (expected_per_cell == 0) throw ContractError("expected_per_cell must be positive");
    ValidationReport report;
    report.expected_per_cell = expected_per_cell;
    report.passed = true;
    for (Region r : kAllRegions) {
        for (Gender g : kAllGenders) {
            CellReport cell{r, g, ds.cell_count(r, g), false};
            cell.conformant = cell.count == expected_per_cell;
            report.passed = report.passed && cell.conformant;
            report.cells.push_back(cell);
        }
    }
    return report;
}

std::vector<Translation> load_translations(const fs::path& path) {
    const auto table = csv::read_table(path);
    const auto lang = csv::column(table.header, "language");
    const auto man = csv::column(table.header, "term_man");
    const auto woman = csv::column(table.header, "term_woman");
    std::vector<Translation> out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.size() != table.header.size()) throw LoadError("malformed translation row", table.lines[i]);
        if (row[man].empty() || row[woman].empty()) {
            throw LoadError("empty translation for '" + row[lang] + "'", table.lines[i]);
        }
        out.push_back({row[lang], row[man], row[woman]});
    }
    return out;
}

fs::path bundled_data_dir() {
    if (const char* env = std::getenv("VLMAUDIT_DATA_DIR"); env && *env) return fs::path(env);
    return fs::path(VLMAUDIT_DATA_DIR);
}

std::vector<QueryPlan> plan_queries(const std::vector<RegionSpec>& regions, std::size_t quota,
                                    const std::vector<Translation>& translations) {
    if (quota == 0) throw ContractError("quota must be positive");
    std::vector<QueryPlan> plans;
    plans.reserve(regions.size() * 2);
    for (const auto& spec : regions) {
        auto it = std::find_if(translations.begin(), translations.end(),
                               [&](const Translation& t) { return t.language == spec.query_language; });
        if (it == translations.end()) {
            throw ConfigError("no translation of 'man'/'woman' for language '" + spec.query_language + "'");
        }
        if (spec.ip_countries.empty()) {
            throw ConfigError("region " + std::string(to_string(spec.abbreviation)) + " lists no egress country");
        }
        plans.push_back({spec.abbreviation, it->term_man, Gender::Man, spec.ip_countries.front(), quota});
        plans.push_back({spec.abbreviation, it->term_woman, Gender::Woman, spec.ip_countries.front(), quota});
    }
    return plans;
}

std::vector<QueryPlan> plan_queries(const std::vector<RegionSpec>& regions, std::size_t quota) {
    return plan_queries(regions, quota, load_translations(bundled_data_dir() / "translations.csv"));
}

std::string make_record_id(std::span<const std::uint8_t> bytes, std::size_t ordinal) {
    const auto digest = sha256(bytes);
    std::string ord = std::to_string(ordinal);
    if (ord.size() < 5) ord.insert(0, 5 - ord.size(), '0');
    return to_hex(std::span(digest).first(6)) + "-" + ord;
}

FetchReport fetch_images(const std::vector<QueryPlan>& plans, FetcherAdapter& fetcher, const fs::path& output_dir) {
    struct Result {
        std::vector<FetchedImage> images;
        std::optional<std::string> error;
    };
    // Adapter calls fan out per plan; everything after is single-writer in
    // plan order so ids and the manifest are deterministic.
    std::vector<std::future<Result>> pending;
    pending.reserve(plans.size());
    for (const auto& plan : plans) {
        pending.push_back(std::async(std::launch::async, [&fetcher, &plan] {
            Result r;
            try {
                r.images = fetcher.fetch(plan.term, plan.egress_country, plan.quota);
            } catch (const std::exception& e) {
                r.error = e.what();
            }
            return r;
        }));
    }

    FetchReport report;
    std::vector<ImageRecord> records;
    std::size_t ordinal = 0;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto& plan = plans[i];
        Result result = pending[i].get();
        PlanOutcome outcome{plan, result.images.size(), 0, result.error};
        for (auto& img : result.images) {
            if (outcome.kept >= plan.quota) break;
            auto info = probe_png(img.bytes);
            if (!info || info->width < 1 || info->height < 1) {
                std::string msg = "skipped undecodable image from '" + img.url + "'";
                outcome.error = outcome.error ? *outcome.error + "; " + msg : msg;
                continue;
            }
            ImageRecord rec;
            rec.id = make_record_id(img.bytes, ordinal++);
            rec.region = plan.region;
            rec.gender = plan.gender;
            rec.query_term = plan.term;
            rec.source_url = img.url;
            rec.file_path = output_dir / "images" / std::string(to_string(plan.region)) /
                            std::string(to_string(plan.gender)) / (rec.id + ".png");
            rec.width = info->width;
            rec.height = info->height;
            write_bytes(rec.file_path, img.bytes);
            records.push_back(std::move(rec));
            ++outcome.kept;
        }
        report.outcomes.push_back(std::move(outcome));
    }
    report.dataset = Dataset(std::move(records));
    report.manifest_path = output_dir / "manifest.csv";
    write_manifest(report.dataset, report.manifest_path);
    return report;
}

DirectoryFetcher::DirectoryFetcher(fs::path root, std::vector<QueryPlan> plans)
    : root_(std::move(root)), plans_(std::move(plans)) {}

std::vector<FetchedImage> DirectoryFetcher::fetch(const std::string& term, const std::string& egress_country,
                                                  std::size_t quota) {
    auto it = std::find_if(plans_.begin(), plans_.end(), [&](const QueryPlan& p) {
        return p.term == term && p.egress_country == egress_country;
    });
    if (it == plans_.end()) throw ConfigError("no plan for term '" + term + "' via " + egress_country);
    const fs::path dir = root_ / std::string(to_string(it->region)) / std::string(to_string(it->gender));
    std::vector<FetchedImage> out;
    if (!fs::is_directory(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        if (out.size() >= quota) break;
        out.push_back({"file://" + fs::absolute(file).generic_string(), read_bytes(file)});
    }
    return out;
}

SyntheticFetcher::SyntheticFetcher(std::uint64_t seed, std::size_t per_plan, int width, int height, Tagger tagger)
    : seed_(seed), per_plan_(per_plan), width_(width), height_(height), tagger_(std::move(tagger)) {}

std::vector<FetchedImage> SyntheticFetcher::fetch(const std::string& term, const std::string& egress_country,
                                                  std::size_t /*quota*/) {
    // Always yields per_plan images; fetch_images enforces the quota.
    PngText text;
    if (tagger_) {
        std::string joined;
        for (const auto& tag : tagger_(term, egress_country)) {
            if (!joined.empty()) joined += ",";
            joined += tag;
        }
        if (!joined.empty()) text[kTagsChunk] = joined;
    }
    const auto key = digest_prefix64(sha256(term + "\x1f" + egress_country)) ^ seed_;
    std::vector<FetchedImage> out;
    for (std::size_t i = 0; i < per_plan_; ++i) {
        const auto image_seed = key + 0x9E3779B97F4A7C15ULL * (i + 1);
        out.push_back({"synthetic://" + egress_country + "/" + term + "/" + std::to_string(i),
                       encode_png(synthetic_image(image_seed, width_, height_), text)});
    }
    return out;
}

}  // namespace vlmaudit
