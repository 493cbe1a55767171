#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vlmaudit {

enum class Region { WANA, NA, WE, SA, SEA, EA, EE, LA, SSA };
inline constexpr std::size_t kRegionCount = 9;
inline constexpr std::array<Region, kRegionCount> kAllRegions = {
    Region::WANA, Region::NA, Region::WE, Region::SA, Region::SEA,
    Region::EA,   Region::EE, Region::LA, Region::SSA};

std::string_view to_string(Region r);
std::optional<Region> parse_region(std::string_view abbreviation);

// Binary perceived-gender label taken from the query term that retrieved
// the image. No classifier ever assigns it.
enum class Gender { Man, Woman };
inline constexpr std::array<Gender, 2> kAllGenders = {Gender::Man, Gender::Woman};

std::string_view to_string(Gender g);
std::optional<Gender> parse_gender(std::string_view value);

struct RegionSpec {
    std::string name;
    Region abbreviation;
    std::string query_language;
    std::vector<std::string> ip_countries;
    // Global Gender Gap Index of the egress country (mean of both when two).
    std::optional<double> gggi;
};

std::vector<RegionSpec> builtin_region_table();

// Applies `abbreviation,gggi` overrides; blank gggi cells leave the value
// unset. Throws LoadError on unknown regions or values outside [0, 1].
void apply_gggi_overrides(std::vector<RegionSpec>& regions, const std::filesystem::path& csv_path);

const RegionSpec& find_region(const std::vector<RegionSpec>& regions, Region r);

struct ImageRecord {
    std::string id;
    Region region = Region::WANA;
    Gender gender = Gender::Man;
    std::string query_term;
    std::string source_url;
    std::filesystem::path file_path;
    int width = 0;
    int height = 0;

    bool materialized() const { return !file_path.empty() && width >= 1 && height >= 1; }
    bool operator==(const ImageRecord&) const = default;
};

using Cell = std::pair<Region, Gender>;

class Dataset {
public:
    Dataset() = default;
    // Throws ContractError on duplicate ids.
    explicit Dataset(std::vector<ImageRecord> records);

    const std::vector<ImageRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    // Count per (region, gender); cells without records are absent.
    const std::map<Cell, std::size_t>& cells() const { return cells_; }
    std::size_t cell_count(Region r, Gender g) const;

    const ImageRecord* find(std::string_view id) const;

    bool operator==(const Dataset& other) const { return records_ == other.records_; }

private:
    std::vector<ImageRecord> records_;
    std::map<Cell, std::size_t> cells_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

// Manifest CSV: id,region,gender,query_term,source_url,file_path,width,height.
// Relative file paths resolve against the manifest's directory.
inline constexpr std::array<std::string_view, 8> kManifestColumns = {
    "id", "region", "gender", "query_term", "source_url", "file_path", "width", "height"};

Dataset load_manifest(const std::filesystem::path& path);
// Paths under the manifest's directory are written relative to it.
void write_manifest(const Dataset& ds, const std::filesystem::path& path);

struct CellReport {
    Region region;
    Gender gender;
    std::size_t count = 0;
    bool conformant = false;
};

struct ValidationReport {
    std::size_t expected_per_cell = 0;
    std::vector<CellReport> cells;  // always all 18, region-table order, man first
    bool passed = false;

    std::vector<CellReport> failing_cells() const;
};

ValidationReport validate_dataset(const Dataset& ds, std::size_t expected_per_cell);

struct Translation {
    std::string language;
    std::string term_man;
    std::string term_woman;
};

// `language,term_man,term_woman`
std::vector<Translation> load_translations(const std::filesystem::path& path);
std::filesystem::path bundled_data_dir();

struct QueryPlan {
    Region region;
    std::string term;
    Gender gender;
    std::string egress_country;
    std::size_t quota = 0;
};

std::vector<QueryPlan> plan_queries(const std::vector<RegionSpec>& regions, std::size_t quota,
                                    const std::vector<Translation>& translations);
// Uses the bundled translations.csv.
std::vector<QueryPlan> plan_queries(const std::vector<RegionSpec>& regions, std::size_t quota);

struct FetchedImage {
    std::string url;
    std::vector<std::uint8_t> bytes;
};

// Seam for dataset construction. Implementations may be called concurrently
// for distinct plans.
class FetcherAdapter {
public:
    virtual ~FetcherAdapter() = default;
    virtual std::vector<FetchedImage> fetch(const std::string& term, const std::string& egress_country,
                                            std::size_t quota) = 0;
};

struct PlanOutcome {
    QueryPlan plan;
    std::size_t received = 0;
    std::size_t kept = 0;
    std::optional<std::string> error;

    std::size_t shortfall() const { return plan.quota > kept ? plan.quota - kept : 0; }
};

struct FetchReport {
    Dataset dataset;
    std::vector<PlanOutcome> outcomes;
    std::filesystem::path manifest_path;
};

// Images are written to `<output_dir>/images/<REGION>/<gender>/<id>.<ext>`
// and the manifest to `<output_dir>/manifest.csv`.
FetchReport fetch_images(const std::vector<QueryPlan>& plans, FetcherAdapter& fetcher,
                         const std::filesystem::path& output_dir);

// Content id: 12 hex chars of the SHA-256 of the bytes, then the ordinal.
std::string make_record_id(std::span<const std::uint8_t> bytes, std::size_t ordinal);

// Reads `<root>/<REGION>/<man|woman>/*.png` for the plan's cell. The term
// and egress country are only used to locate the plan's cell, so each
// adapter instance is bound to one region table.
class DirectoryFetcher : public FetcherAdapter {
public:
    DirectoryFetcher(std::filesystem::path root, std::vector<QueryPlan> plans);
    std::vector<FetchedImage> fetch(const std::string& term, const std::string& egress_country,
                                    std::size_t quota) override;

private:
    std::filesystem::path root_;
    std::vector<QueryPlan> plans_;
};

// Generates deterministic PNGs; used offline and in tests. Images carry the
// tags produced by `tagger(term, egress_country)` in their text chunk.
class SyntheticFetcher : public FetcherAdapter {
public:
    using Tagger = std::function<std::vector<std::string>(const std::string&, const std::string&)>;
    SyntheticFetcher(std::uint64_t seed, std::size_t per_plan, int width = 64, int height = 64,
                     Tagger tagger = {});
    std::vector<FetchedImage> fetch(const std::string& term, const std::string& egress_country,
                                    std::size_t quota) override;

private:
    std::uint64_t seed_;
    std::size_t per_plan_;
    int width_;
    int height_;
    Tagger tagger_;
};

}  // namespace vlmaudit
