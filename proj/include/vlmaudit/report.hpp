#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vlmaudit/analysis.hpp"

namespace vlmaudit {

inline constexpr std::string_view kToolVersion = "0.3.0";

struct Provenance {
    std::string backend_name;
    std::string config_hash;
    std::string timestamp;  // ISO 8601, UTC
    std::string tool_version = std::string(kToolVersion);
    std::optional<std::uint64_t> seed;
};

// ISO 8601 UTC stamp. With `wall_clock` false the time comes from
// SOURCE_DATE_EPOCH, or the Unix epoch when it is unset.
std::string provenance_timestamp(bool wall_clock);

struct AuditReport {
    AggregationMode mode = AggregationMode::Raw;
    GroupMeanTable group_means;
    std::vector<SetScore> set_scores;
    std::vector<TrendScore> trends;
    std::vector<GenderDifferenceScore> gender_differences;
    std::map<KeywordSet, CorrelationResult> correlations;
    std::vector<std::string> warnings;
    Provenance provenance;

    const SetScore* find_set_score(Region r, Gender g, Subclass s) const;
    const TrendScore* find_trend(Region r, Gender g) const;
    const GenderDifferenceScore* find_gender_difference(Region r, KeywordSet set) const;
};

// Aggregates every keyword set that has at least one entry in the table.
// Trends are computed for the traits set. Correlations are added for each
// set when every region in the table has a gggi value in `regions`.
AuditReport build_report(const GroupMeanTable& table, AggregationMode mode,
                         const std::vector<RegionSpec>* regions = nullptr, Provenance provenance = {});

// Summary layout: one row per (set, gender, type); gender is empty on
// gender-difference rows. Region columns follow kTable2RegionOrder.
struct Table2Row {
    KeywordSet set;
    std::optional<Gender> gender;
    std::string type;  // subclass name, "trend" or "gender_difference"
    std::map<Region, double> values;
};

struct Table2 {
    AggregationMode mode = AggregationMode::Reproduce;
    std::vector<Region> regions;
    std::vector<Table2Row> rows;

    const Table2Row* find(KeywordSet set, std::optional<Gender> gender, std::string_view type) const;
    std::optional<double> value(KeywordSet set, std::optional<Gender> gender, std::string_view type, Region r) const;
};

inline constexpr std::array<Region, 9> kTable2RegionOrder = {
    Region::WANA, Region::EA, Region::WE, Region::NA, Region::SA, Region::SEA, Region::EE, Region::LA, Region::SSA};

Table2 make_table2(const AuditReport& report);
// Reproduce-mode values print at 2 decimals, raw values in shortest
// round-trip form.
std::string format_table2_csv(const Table2& table);
Table2 parse_table2_csv(std::string_view text);
std::string format_table2_text(const Table2& table);

std::string format_scatter_csv(const CorrelationResult& result);
std::string report_json(const AuditReport& report);

enum class Format { Csv, Json, Png };
std::string_view to_string(Format f);
std::optional<Format> parse_format(std::string_view s);
using FormatSet = std::set<Format>;

// Artifacts:
//   csv  group_means.csv, table2.csv, scatter_<set>.csv (with correlations)
//   json report.json
//   png  heatmap_<set>_<gender>.png, scatter_<set>.png (with correlations)
// Files are staged and moved into place only when all of them were written;
// on failure the staging directory is removed.
std::vector<std::filesystem::path> emit_report(const AuditReport& report, const std::filesystem::path& output_dir,
                                               const FormatSet& formats);

}  // namespace vlmaudit
