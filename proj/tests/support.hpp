#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vlmaudit/csv.hpp"
#include "vlmaudit/dataset.hpp"
#include "vlmaudit/pipeline.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "vlmaudit-test-XXXXXX").string();
        path_ = mkdtemp(tmpl.data());
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

// Writes a synthetic 18-cell dataset under `dir` and returns its manifest.
// Images in `tagged` cells carry `tag` in their text chunk.
inline fs::path make_synthetic_dataset(const fs::path& dir, std::size_t per_cell, std::uint64_t seed,
                                       const std::set<vlmaudit::Cell>& tagged = {}, const std::string& tag = "plant",
                                       int size = 16) {
    using namespace vlmaudit;
    const auto plans = plan_queries(builtin_region_table(), per_cell);
    std::set<std::pair<std::string, std::string>> tagged_queries;
    for (const auto& p : plans) {
        if (tagged.count({p.region, p.gender})) tagged_queries.insert({p.term, p.egress_country});
    }
    SyntheticFetcher fetcher(seed, per_cell, size, size, [=](const std::string& term, const std::string& egress) {
        return tagged_queries.count({term, egress}) ? std::vector<std::string>{tag} : std::vector<std::string>{};
    });
    return fetch_images(plans, fetcher, dir).manifest_path;
}

// Regions-table override giving every region a distinct index value.
inline fs::path write_gggi_csv(const fs::path& path) {
    std::string text = "abbreviation,gggi\n";
    double v = 0.60;
    for (auto r : vlmaudit::kAllRegions) {
        text += std::string(vlmaudit::to_string(r)) + "," + std::to_string(v) + "\n";
        v += 0.025;
    }
    vlmaudit::csv::write_file(path, text);
    return path;
}

// Negative-trait plants of margin `delta` for images tagged `tag`.
inline std::vector<vlmaudit::PlantedAssociation> negative_trait_plants(double delta, const std::string& tag = "plant") {
    std::vector<vlmaudit::PlantedAssociation> out;
    for (const auto& k : vlmaudit::builtin_lexicon().select(vlmaudit::KeywordSet::Traits, vlmaudit::Subclass::Negative)) {
        out.push_back({tag, k.text, delta});
    }
    return out;
}

// Runs the mock pipeline on an 18-cell synthetic dataset whose `tagged`
// cells carry the plant tag. Returns man trend minus woman trend per region.
inline std::map<vlmaudit::Region, double> planted_trend_gaps(const fs::path& dir, std::uint64_t seed, double delta,
                                                             const std::set<vlmaudit::Cell>& tagged,
                                                             std::size_t per_cell = 70, std::size_t dim = 4096) {
    using namespace vlmaudit;
    AuditConfig cfg;
    cfg.manifest_path = make_synthetic_dataset(dir / "data", per_cell, seed, tagged);
    cfg.expected_per_cell = per_cell;
    cfg.backend.kind = BackendKind::Mock;
    cfg.backend.seed = seed;
    cfg.backend.dim = dim;
    cfg.backend.planted_associations = negative_trait_plants(delta);
    cfg.threads = 4;
    cfg.output_dir = dir / "out";
    cfg.formats = {Format::Json};
    const auto result = run_pipeline(cfg);
    std::map<Region, double> gaps;
    for (Region r : kAllRegions) {
        gaps[r] = result.report.find_trend(r, Gender::Man)->trend - result.report.find_trend(r, Gender::Woman)->trend;
    }
    return gaps;
}

// Two-tailed Student-t tail probability for integer df from the finite
// trigonometric series (Abramowitz & Stegun 26.7.3 and 26.7.4).
inline double t_two_tailed_series(double t, int df) {
    const double theta = std::atan(std::abs(t) / std::sqrt(static_cast<double>(df)));
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    double a = 0.0;
    if (df % 2 == 1) {
        double sum = 0.0;
        if (df > 1) {
            double term = c;
            sum = term;
            for (int k = 3; k <= df - 2; k += 2) {
                term *= c * c * static_cast<double>(k - 1) / static_cast<double>(k);
                sum += term;
            }
        }
        a = 2.0 / std::numbers::pi * (theta + s * sum);
    } else {
        double term = 1.0;
        double sum = 1.0;
        for (int k = 2; k <= df - 2; k += 2) {
            term *= c * c * static_cast<double>(k - 1) / static_cast<double>(k);
            sum += term;
        }
        a = s * sum;
    }
    return 1.0 - a;
}

// Average ranks, ties sharing the mean of their positions.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) out[idx[k]] = r;
        i = j + 1;
    }
    return out;
}

inline double plain_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return plain_pearson(ranks(x), ranks(y));
}

}  // namespace testing_support
