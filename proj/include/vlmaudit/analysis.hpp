#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vlmaudit/dataset.hpp"
#include "vlmaudit/encoder.hpp"
#include "vlmaudit/lexicon.hpp"

namespace vlmaudit {

// (a . b) / (|a| |b|). Throws ComputationError on dimension mismatch or a
// zero vector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class SimilarityMatrix {
public:
    SimilarityMatrix() = default;
    SimilarityMatrix(std::vector<std::string> image_ids, std::vector<std::string> prompt_ids,
                     std::vector<double> values);

    std::size_t rows() const { return image_ids_.size(); }
    std::size_t cols() const { return prompt_ids_.size(); }
    double at(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }

    const std::vector<std::string>& image_ids() const { return image_ids_; }
    const std::vector<std::string>& prompt_ids() const { return prompt_ids_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<std::string> image_ids_;
    std::vector<std::string> prompt_ids_;
    std::vector<double> values_;
};

// Rows are images, columns prompts. Rows may be computed on `threads`
// workers; every entry is computed the same way regardless.
SimilarityMatrix similarity_matrix(const EmbeddingBatch& images, const EmbeddingBatch& prompts,
                                   std::size_t threads = 1);

struct GroupKey {
    Region region;
    Gender gender;
    std::string keyword;

    auto operator<=>(const GroupKey&) const = default;
};

struct GroupStat {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::size_t n = 0;
};

// Per-(region, gender, keyword) statistics plus the keyword metadata needed
// to aggregate them into keyword-set sums.
class GroupMeanTable {
public:
    GroupMeanTable() = default;
    explicit GroupMeanTable(std::vector<Keyword> keywords) : keywords_(std::move(keywords)) {}

    const std::vector<Keyword>& keywords() const { return keywords_; }
    const std::map<GroupKey, GroupStat>& entries() const { return entries_; }

    // Throws ContractError when the keyword is unknown or the stat breaks
    // n > 0, mean in [-1, 1], std >= 0.
    void set(Region r, Gender g, const std::string& keyword, GroupStat stat);
    const GroupStat* find(Region r, Gender g, const std::string& keyword) const;

    // Regions that have at least one entry, in region-table order.
    std::vector<Region> regions() const;

private:
    std::vector<Keyword> keywords_;
    std::map<GroupKey, GroupStat> entries_;
};

GroupMeanTable group_means(const SimilarityMatrix& matrix, const Dataset& ds, const Lexicon& lex);

inline constexpr double kStdWarningThreshold = 0.015;
// One message per entry whose std is at or above the threshold.
std::vector<std::string> std_warnings(const GroupMeanTable& table, double threshold = kStdWarningThreshold);

// Per-keyword means layout: `gender,keyword,<region...>`, 3-decimal means. Loaded
// entries get std 0 and n = `cell_size`.
GroupMeanTable load_group_means_csv(const std::filesystem::path& path, const Lexicon& lex,
                                    std::size_t cell_size = 70);
std::string format_group_means_csv(const GroupMeanTable& table);

enum class AggregationMode { Raw, Reproduce };
std::string_view to_string(AggregationMode m);
std::optional<AggregationMode> parse_aggregation_mode(std::string_view s);

struct SetScore {
    Region region;
    Gender gender;
    KeywordSet set;
    Subclass subclass;
    double value = 0.0;
    AggregationMode mode = AggregationMode::Raw;
};

// Raw: exact sum of the subclass's keyword means. Reproduce: each mean
// rounded to 3 decimals, summed, rounded to 2 decimals, clamped to <= 1.00;
// the rounding is done in integer thousandths so it is exact.
SetScore set_sum(const GroupMeanTable& table, Region r, Gender g, KeywordSet set, Subclass subclass,
                 AggregationMode mode);

struct TrendScore {
    Region region;
    Gender gender;
    double positive_sum = 0.0;
    double negative_sum = 0.0;
    double trend = 0.0;
    AggregationMode mode = AggregationMode::Raw;
};

TrendScore trend(const SetScore& positive, const SetScore& negative);

struct GenderDifferenceScore {
    Region region;
    KeywordSet set;
    double men_total = 0.0;
    double women_total = 0.0;
    double value = 0.0;
    AggregationMode mode = AggregationMode::Raw;
};

GenderDifferenceScore gender_difference(const GroupMeanTable& table, Region r, KeywordSet set, AggregationMode mode);
// |men - women| from already-aggregated subclass sums.
GenderDifferenceScore gender_difference(const SetScore& men_a, const SetScore& men_b, const SetScore& women_a,
                                        const SetScore& women_b);

struct CorrelationResult {
    double r = 0.0;
    double p = 1.0;
    std::size_t n = 0;
    std::vector<std::pair<double, double>> pairs;
    std::vector<std::string> labels;  // one per pair when known
};

// Sample Pearson r with a two-tailed p from t = r sqrt((n-2)/(1-r^2)) on
// n-2 degrees of freedom.
CorrelationResult pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Pairs (gggi, gender difference) per score, labelled by region.
CorrelationResult correlate_with_index(const std::vector<GenderDifferenceScore>& gd,
                                       const std::vector<RegionSpec>& regions);

}  // namespace vlmaudit
