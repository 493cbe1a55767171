#include "vlmaudit/analysis.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include "vlmaudit/csv.hpp"
#include "vlmaudit/error.hpp"

namespace vlmaudit {

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw ComputationError("cosine: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                               std::to_string(b.dim()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) throw ComputationError("cosine: zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

SimilarityMatrix::SimilarityMatrix(std::vector<std::string> image_ids, std::vector<std::string> prompt_ids,
                                   std::vector<double> values)
    : image_ids_(std::move(image_ids)), prompt_ids_(std::move(prompt_ids)), values_(std::move(values)) {
    if (values_.size() != image_ids_.size() * prompt_ids_.size()) {
        throw ContractError("similarity matrix shape does not match its labels");
    }
}

SimilarityMatrix similarity_matrix(const EmbeddingBatch& images, const EmbeddingBatch& prompts, std::size_t threads) {
    if (images.size() > 0 && prompts.size() > 0 && images.dim() != prompts.dim()) {
        throw ComputationError("embedding dimension mismatch: images from '" + images.backend_name + "' have dim " +
                               std::to_string(images.dim()) + ", prompts from '" + prompts.backend_name +
                               "' have dim " + std::to_string(prompts.dim()));
    }
    const std::size_t rows = images.size();
    const std::size_t cols = prompts.size();
    std::vector<double> values(rows * cols);
    auto fill_rows = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < rows; i += stride) {
            for (std::size_t j = 0; j < cols; ++j) values[i * cols + j] = cosine(images.vectors[i], prompts.vectors[j]);
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, rows));
    if (threads == 1) {
        fill_rows(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(fill_rows, t, threads);
    }
    return SimilarityMatrix(images.ids, prompts.ids, std::move(values));
}

void GroupMeanTable::set(Region r, Gender g, const std::string& keyword, GroupStat stat) {
    if (std::none_of(keywords_.begin(), keywords_.end(), [&](const Keyword& k) { return k.text == keyword; })) {
        throw ContractError("keyword '" + keyword + "' is not in the table's lexicon");
    }
    if (stat.n == 0 || !(stat.mean >= -1.0 - 1e-9 && stat.mean <= 1.0 + 1e-9) || !(stat.std >= 0.0)) {
        throw ContractError("invalid group statistic for " + std::string(to_string(r)) + "/" +
                            std::string(to_string(g)) + "/" + keyword);
    }
    entries_[{r, g, keyword}] = stat;
}

const GroupStat* GroupMeanTable::find(Region r, Gender g, const std::string& keyword) const {
    auto it = entries_.find({r, g, keyword});
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<Region> GroupMeanTable::regions() const {
    std::set<Region> present;
    for (const auto& [key, _] : entries_) present.insert(key.region);
    std::vector<Region> out;
    for (Region r : kAllRegions) {
        if (present.count(r)) out.push_back(r);
    }
    return out;
}

GroupMeanTable group_means(const SimilarityMatrix& matrix, const Dataset& ds, const Lexicon& lex) {
    std::vector<const ImageRecord*> row_records;
    std::vector<std::string> orphans;
    for (const auto& id : matrix.image_ids()) {
        const auto* rec = ds.find(id);
        if (!rec) orphans.push_back("image '" + id + "'");
        row_records.push_back(rec);
    }
    std::vector<const Keyword*> col_keywords;
    for (const auto& id : matrix.prompt_ids()) {
        const auto* kw = lex.find(id);
        if (!kw) orphans.push_back("prompt '" + id + "'");
        col_keywords.push_back(kw);
    }
    if (!orphans.empty()) {
        std::string msg = "ids missing from dataset/lexicon:";
        for (const auto& o : orphans) msg += " " + o;
        throw ComputationError(msg);
    }

    std::map<GroupKey, std::vector<double>> cells;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            cells[{row_records[i]->region, row_records[i]->gender, col_keywords[j]->text}].push_back(matrix.at(i, j));
        }
    }

    GroupMeanTable table(lex.keywords());
    for (auto& [key, values] : cells) {
        // Sorted summation makes the result independent of record order.
        std::sort(values.begin(), values.end());
        const double n = static_cast<double>(values.size());
        double sum = 0.0;
        for (double v : values) sum += v;
        const double mean = sum / n;
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        table.set(key.region, key.gender, key.keyword, {mean, std::sqrt(ss / n), values.size()});
    }
    return table;
}

std::vector<std::string> std_warnings(const GroupMeanTable& table, double threshold) {
    std::vector<std::string> out;
    for (const auto& [key, stat] : table.entries()) {
        if (stat.std >= threshold) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.4f", stat.std);
            out.push_back("std " + std::string(buf) + " >= threshold for " + std::string(to_string(key.region)) + "/" +
                          std::string(to_string(key.gender)) + "/" + key.keyword);
        }
    }
    return out;
}

GroupMeanTable load_group_means_csv(const std::filesystem::path& path, const Lexicon& lex, std::size_t cell_size) {
    const auto table = csv::read_table(path);
    const auto gender_col = csv::column(table.header, "gender");
    const auto keyword_col = csv::column(table.header, "keyword");
    std::vector<std::pair<std::size_t, Region>> region_cols;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == gender_col || c == keyword_col) continue;
        auto r = parse_region(table.header[c]);
        if (!r) throw LoadError("unknown region column '" + table.header[c] + "'", 1);
        region_cols.emplace_back(c, *r);
    }
    GroupMeanTable out(lex.keywords());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const auto line = table.lines[i];
        if (row.size() != table.header.size()) throw LoadError("malformed row", line);
        auto g = parse_gender(row[gender_col]);
        if (!g) throw LoadError("unknown gender '" + row[gender_col] + "'", line);
        if (!lex.find(row[keyword_col])) throw LoadError("keyword '" + row[keyword_col] + "' not in lexicon", line);
        for (auto [c, region] : region_cols) {
            const auto& cell = row[c];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw LoadError("bad value '" + cell + "' for " + table.header[c], line);
            }
            if (v < -1.0 || v > 1.0) throw LoadError("mean outside [-1, 1] for " + table.header[c], line);
            out.set(region, *g, row[keyword_col], {v, 0.0, cell_size});
        }
    }
    return out;
}

std::string format_group_means_csv(const GroupMeanTable& table) {
    const auto regions = table.regions();
    csv::Row header{"gender", "keyword"};
    for (Region r : regions) header.emplace_back(to_string(r));
    std::string out = csv::join(header) + "\n";
    for (Gender g : kAllGenders) {
        for (const auto& kw : table.keywords()) {
            csv::Row row{std::string(to_string(g)), kw.text};
            bool any = false;
            for (Region r : regions) {
                const auto* stat = table.find(r, g, kw.text);
                if (stat) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "%.3f", stat->mean);
                    row.emplace_back(buf);
                    any = true;
                } else {
                    row.emplace_back();
                }
            }
            if (any) out += csv::join(row) + "\n";
        }
    }
    return out;
}

std::string_view to_string(AggregationMode m) { return m == AggregationMode::Raw ? "raw" : "reproduce"; }

std::optional<AggregationMode> parse_aggregation_mode(std::string_view s) {
    if (s == "raw") return AggregationMode::Raw;
    if (s == "reproduce") return AggregationMode::Reproduce;
    return std::nullopt;
}

namespace {

// Round half away from zero, integer thousandths to integer hundredths.
long long milli_to_centi(long long milli) {
    return milli >= 0 ? (milli + 5) / 10 : -((-milli + 5) / 10);
}

}  // namespace

SetScore set_sum(const GroupMeanTable& table, Region r, Gender g, KeywordSet set, Subclass subclass,
                 AggregationMode mode) {
    if (set_of(subclass) != set) {
        throw ContractError("subclass " + std::string(to_string(subclass)) + " is not part of set " +
                            std::string(to_string(set)));
    }
    SetScore out{r, g, set, subclass, 0.0, mode};
    double raw = 0.0;
    long long milli = 0;
    bool any = false;
    for (const auto& kw : table.keywords()) {
        if (kw.set != set || kw.subclass != subclass) continue;
        const auto* stat = table.find(r, g, kw.text);
        if (!stat) {
            throw ComputationError("missing mean for " + std::string(to_string(r)) + "/" + std::string(to_string(g)) +
                                   "/" + kw.text);
        }
        raw += stat->mean;
        milli += std::llround(stat->mean * 1000.0);
        any = true;
    }
    if (!any) throw ComputationError("no keywords for " + std::string(to_string(set)) + "/" + std::string(to_string(subclass)));
    if (mode == AggregationMode::Raw) {
        out.value = raw;
    } else {
        out.value = static_cast<double>(std::min(milli_to_centi(milli), 100LL)) / 100.0;
    }
    return out;
}

TrendScore trend(const SetScore& positive, const SetScore& negative) {
    if (positive.region != negative.region || positive.gender != negative.gender || positive.mode != negative.mode) {
        throw ContractError("trend: positive and negative sums must share region, gender and mode");
    }
    if (positive.subclass != Subclass::Positive || negative.subclass != Subclass::Negative) {
        throw ContractError("trend: expects a positive and a negative trait sum");
    }
    return {positive.region, positive.gender, positive.value, negative.value, positive.value - negative.value,
            positive.mode};
}

GenderDifferenceScore gender_difference(const SetScore& men_a, const SetScore& men_b, const SetScore& women_a,
                                        const SetScore& women_b) {
    const SetScore* all[] = {&men_a, &men_b, &women_a, &women_b};
    for (const auto* s : all) {
        if (s->region != men_a.region || s->set != men_a.set || s->mode != men_a.mode) {
            throw ContractError("gender_difference: sums must share region, set and mode");
        }
    }
    if (men_a.gender != Gender::Man || men_b.gender != Gender::Man || women_a.gender != Gender::Woman ||
        women_b.gender != Gender::Woman || men_a.subclass == men_b.subclass || women_a.subclass == women_b.subclass) {
        throw ContractError("gender_difference: expects both subclasses for each gender");
    }
    GenderDifferenceScore out{men_a.region, men_a.set, men_a.value + men_b.value, women_a.value + women_b.value, 0.0,
                              men_a.mode};
    out.value = std::abs(out.men_total - out.women_total);
    return out;
}

GenderDifferenceScore gender_difference(const GroupMeanTable& table, Region r, KeywordSet set, AggregationMode mode) {
    const auto subs = subclasses_of(set);
    return gender_difference(set_sum(table, r, Gender::Man, set, subs[0], mode),
                             set_sum(table, r, Gender::Man, set, subs[1], mode),
                             set_sum(table, r, Gender::Woman, set, subs[0], mode),
                             set_sum(table, r, Gender::Woman, set, subs[1], mode));
}

CorrelationResult pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) {
        throw ContractError("pearson: length mismatch (" + std::to_string(xs.size()) + " vs " +
                            std::to_string(ys.size()) + ")");
    }
    if (xs.size() < 3) throw ContractError("pearson: need at least 3 points");
    auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(xs) || constant(ys)) throw ComputationError("pearson: undefined correlation (zero variance)");
    const std::size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw ComputationError("pearson: undefined correlation (zero variance)");

    CorrelationResult out;
    out.n = n;
    out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) out.pairs.emplace_back(xs[i], ys[i]);
    const double df = static_cast<double>(n - 2);
    const double one_minus_r2 = 1.0 - out.r * out.r;
    if (one_minus_r2 <= 0.0) {
        out.p = 0.0;
    } else {
        const double t = std::abs(out.r) * std::sqrt(df / one_minus_r2);
        boost::math::students_t dist(df);
        out.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
    }
    return out;
}

CorrelationResult correlate_with_index(const std::vector<GenderDifferenceScore>& gd,
                                       const std::vector<RegionSpec>& regions) {
    std::vector<double> xs, ys;
    std::vector<std::string> labels, missing;
    for (const auto& score : gd) {
        auto it = std::find_if(regions.begin(), regions.end(),
                               [&](const RegionSpec& s) { return s.abbreviation == score.region; });
        if (it == regions.end() || !it->gggi) {
            missing.emplace_back(to_string(score.region));
            continue;
        }
        xs.push_back(*it->gggi);
        ys.push_back(score.value);
        labels.emplace_back(to_string(score.region));
    }
    if (!missing.empty()) {
        std::string msg = "no gender gap index value for:";
        for (const auto& m : missing) msg += " " + m;
        throw ConfigError(msg);
    }
    auto out = pearson(xs, ys);
    out.labels = std::move(labels);
    return out;
}

}  // namespace vlmaudit
