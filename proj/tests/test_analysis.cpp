#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>

#include "support.hpp"
#include "vlmaudit/analysis.hpp"
#include "vlmaudit/csv.hpp"
#include "vlmaudit/error.hpp"

using namespace vlmaudit;
using testing_support::TempDir;

namespace {

EmbeddingVector random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    EmbeddingVector v;
    v.values.resize(dim);
    for (auto& x : v.values) x = n(rng);
    return v;
}

EmbeddingBatch random_batch(std::mt19937_64& rng, std::size_t count, std::size_t dim, const std::string& prefix) {
    EmbeddingBatch b;
    b.backend_name = "test";
    for (std::size_t i = 0; i < count; ++i) {
        b.ids.push_back(prefix + std::to_string(i));
        b.vectors.push_back(random_vector(rng, dim));
    }
    return b;
}

double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

std::vector<ImageRecord> cell_records(std::size_t per_cell) {
    std::vector<ImageRecord> out;
    for (Region r : kAllRegions) {
        for (Gender g : kAllGenders) {
            for (std::size_t i = 0; i < per_cell; ++i) {
                ImageRecord rec;
                rec.id = std::string(to_string(r)) + "-" + std::string(to_string(g)) + "-" + std::to_string(i);
                rec.region = r;
                rec.gender = g;
                out.push_back(rec);
            }
        }
    }
    return out;
}

std::vector<std::string> keyword_ids(const Lexicon& lex) {
    std::vector<std::string> ids;
    for (const auto& k : lex.keywords()) ids.push_back(k.text);
    return ids;
}

GroupMeanTable appendix() { return load_group_means_csv(bundled_data_dir() / "appendix_a.csv", builtin_lexicon()); }

SetScore score(Region r, Gender g, KeywordSet set, Subclass sub, double v) {
    return SetScore{r, g, set, sub, v, AggregationMode::Reproduce};
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Cosine, BasicProperties) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        auto a = random_vector(rng, 17);
        auto b = random_vector(rng, 17);
        EXPECT_NEAR(cosine(a, a), 1.0, 1e-9);
        EXPECT_DOUBLE_EQ(cosine(a, b), cosine(b, a));
        auto neg = a;
        for (auto& x : neg.values) x = -x;
        EXPECT_NEAR(cosine(a, neg), -1.0, 1e-9);
        auto scaled = a;
        const double alpha = std::exp(std::uniform_real_distribution<double>(-10, 10)(rng));
        for (auto& x : scaled.values) x *= alpha;
        EXPECT_NEAR(cosine(scaled, b), cosine(a, b), 1e-9);
        EXPECT_LE(std::abs(cosine(a, b)), 1.0);
    }
    EXPECT_EQ(cosine(EmbeddingVector{{1, 0, 0}}, EmbeddingVector{{0, 1, 0}}), 0.0);
}

TEST(Cosine, Errors) {
    EXPECT_THROW(cosine(EmbeddingVector{{1, 0}}, EmbeddingVector{{1, 0, 0}}), ComputationError);
    EXPECT_THROW(cosine(EmbeddingVector{{0, 0}}, EmbeddingVector{{1, 0}}), ComputationError);
}

TEST(SimilarityMatrix, MatchesBruteForceLoop) {
    std::mt19937_64 rng(2);
    const auto images = random_batch(rng, 10, 32, "i");
    const auto prompts = random_batch(rng, 10, 32, "p");
    for (std::size_t threads : {1u, 3u}) {
        const auto m = similarity_matrix(images, prompts, threads);
        ASSERT_EQ(m.rows(), 10u);
        ASSERT_EQ(m.cols(), 10u);
        EXPECT_EQ(m.image_ids(), images.ids);
        EXPECT_EQ(m.prompt_ids(), prompts.ids);
        double worst = 0.0;
        for (std::size_t i = 0; i < 10; ++i) {
            for (std::size_t j = 0; j < 10; ++j) {
                worst = std::max(worst, std::abs(m.at(i, j) -
                                                 naive_cosine(images.vectors[i].values, prompts.vectors[j].values)));
            }
        }
        EXPECT_LT(worst, 1e-9);
    }
}

TEST(SimilarityMatrix, ShapeAndSelfSimilarity) {
    std::mt19937_64 rng(3);
    auto images = random_batch(rng, 2, 5, "i");
    auto prompts = random_batch(rng, 3, 5, "p");
    prompts.vectors[1] = images.vectors[0];
    const auto m = similarity_matrix(images, prompts);
    EXPECT_EQ(m.values().size(), 6u);
    EXPECT_NEAR(m.at(0, 1), 1.0, 1e-12);
}

TEST(SimilarityMatrix, DimMismatchNamesBothBackends) {
    std::mt19937_64 rng(4);
    auto images = random_batch(rng, 2, 5, "i");
    auto prompts = random_batch(rng, 2, 6, "p");
    images.backend_name = "alpha";
    prompts.backend_name = "beta";
    try {
        similarity_matrix(images, prompts);
        FAIL();
    } catch (const ComputationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("alpha"), std::string::npos);
        EXPECT_NE(msg.find("beta"), std::string::npos);
    }
}

// ---------------------------------------------------------------------------

TEST(GroupMeans, MatchHandComputation) {
    const auto lex = builtin_lexicon();
    const auto records = cell_records(4);
    const Dataset ds(records);
    const auto kws = keyword_ids(lex);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.5);
    std::vector<double> values(records.size() * kws.size());
    for (auto& v : values) v = u(rng);
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.id);
    const SimilarityMatrix m(ids, kws, values);
    const auto table = group_means(m, ds, lex);
    EXPECT_EQ(table.entries().size(), 18u * 30u);
    for (std::size_t j = 0; j < kws.size(); ++j) {
        for (Region r : kAllRegions) {
            for (Gender g : kAllGenders) {
                std::vector<double> cell;
                for (std::size_t i = 0; i < records.size(); ++i) {
                    if (records[i].region == r && records[i].gender == g) cell.push_back(values[i * kws.size() + j]);
                }
                double mean = 0.0;
                for (double v : cell) mean += v;
                mean /= static_cast<double>(cell.size());
                double var = 0.0;
                for (double v : cell) var += (v - mean) * (v - mean);
                var /= static_cast<double>(cell.size());
                const auto* stat = table.find(r, g, kws[j]);
                ASSERT_NE(stat, nullptr);
                EXPECT_EQ(stat->n, 4u);
                EXPECT_NEAR(stat->mean, mean, 1e-15);
                EXPECT_NEAR(stat->std, std::sqrt(var), 1e-12);
            }
        }
    }
}

TEST(GroupMeans, SingletonCell) {
    const auto lex = builtin_lexicon();
    const auto records = cell_records(1);
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.id);
    std::vector<double> values(ids.size() * 30, 0.25);
    values[0] = 0.125;
    const auto table = group_means(SimilarityMatrix(ids, keyword_ids(lex), values), Dataset(records), lex);
    const auto* s = table.find(Region::WANA, Gender::Man, "trustworthy");
    EXPECT_EQ(s->mean, 0.125);
    EXPECT_EQ(s->std, 0.0);
    EXPECT_EQ(s->n, 1u);
}

TEST(GroupMeans, IndependentOfRecordOrder) {
    const auto lex = builtin_lexicon();
    auto records = cell_records(6);
    std::vector<std::string> kws = keyword_ids(lex);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.1, 0.3);
    std::map<std::string, std::vector<double>> row_of;
    for (const auto& r : records) {
        auto& row = row_of[r.id];
        for (std::size_t j = 0; j < kws.size(); ++j) row.push_back(u(rng));
    }
    auto build = [&](const std::vector<ImageRecord>& recs) {
        std::vector<std::string> ids;
        std::vector<double> values;
        for (const auto& r : recs) {
            ids.push_back(r.id);
            values.insert(values.end(), row_of[r.id].begin(), row_of[r.id].end());
        }
        return group_means(SimilarityMatrix(ids, kws, values), Dataset(recs), lex);
    };
    const auto a = build(records);
    std::shuffle(records.begin(), records.end(), rng);
    const auto b = build(records);
    ASSERT_EQ(a.entries().size(), b.entries().size());
    for (const auto& [key, stat] : a.entries()) {
        const auto& other = b.entries().at(key);
        EXPECT_EQ(stat.mean, other.mean);
        EXPECT_EQ(stat.std, other.std);
    }
}

TEST(GroupMeans, OrphanIdsAreListed) {
    const auto lex = builtin_lexicon();
    const auto records = cell_records(1);
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.id);
    ids[3] = "ghost-1";
    ids[7] = "ghost-2";
    try {
        group_means(SimilarityMatrix(ids, keyword_ids(lex), std::vector<double>(ids.size() * 30, 0.2)),
                    Dataset(records), lex);
        FAIL();
    } catch (const ComputationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("ghost-1"), std::string::npos);
        EXPECT_NE(msg.find("ghost-2"), std::string::npos);
    }
    auto kws = keyword_ids(lex);
    kws[0] = "unicorn";
    EXPECT_ANY_THROW(group_means(
        SimilarityMatrix(std::vector<std::string>(ids.begin(), ids.begin() + 1), kws, std::vector<double>(30, 0.2)),
        Dataset(records), lex));
}

TEST(GroupMeans, ConstantCellsReproduceTheFixture) {
    const Lexicon lex(builtin_lexicon().select(KeywordSet::Traits));
    const auto fixture = appendix();
    const auto records = cell_records(2);
    const auto kws = keyword_ids(lex);
    std::vector<std::string> ids;
    std::vector<double> values;
    for (const auto& r : records) {
        ids.push_back(r.id);
        for (const auto& k : kws) values.push_back(fixture.find(r.region, r.gender, k)->mean);
    }
    const auto table = group_means(SimilarityMatrix(ids, kws, values), Dataset(records), lex);
    for (const auto& [key, stat] : fixture.entries()) {
        EXPECT_EQ(table.find(key.region, key.gender, key.keyword)->mean, stat.mean);
    }
    EXPECT_EQ(format_group_means_csv(table), csv::read_file(bundled_data_dir() / "appendix_a.csv"));
}

TEST(GroupMeanTable, SetRejectsBadStats) {
    GroupMeanTable t(builtin_lexicon().keywords());
    EXPECT_THROW(t.set(Region::NA, Gender::Man, "nobody", {0.1, 0.0, 1}), ContractError);
    EXPECT_THROW(t.set(Region::NA, Gender::Man, "smart", {0.1, 0.0, 0}), ContractError);
    EXPECT_THROW(t.set(Region::NA, Gender::Man, "smart", {1.5, 0.0, 1}), ContractError);
    EXPECT_THROW(t.set(Region::NA, Gender::Man, "smart", {0.1, -0.1, 1}), ContractError);
    t.set(Region::EA, Gender::Man, "smart", {0.1, 0.0, 1});
    t.set(Region::WANA, Gender::Man, "smart", {0.1, 0.0, 1});
    EXPECT_EQ(t.regions(), (std::vector<Region>{Region::WANA, Region::EA}));
}

TEST(GroupMeanTable, StdWarningsAtThreshold) {
    auto table = appendix();
    EXPECT_TRUE(std_warnings(table).empty());
    table.set(Region::SA, Gender::Woman, "dancer", {0.2, 0.015, 70});
    const auto w = std_warnings(table);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_NE(w[0].find("dancer"), std::string::npos);
    table.set(Region::SA, Gender::Woman, "dancer", {0.2, 0.0149, 70});
    EXPECT_TRUE(std_warnings(table).empty());
}

TEST(GroupMeanTable, CsvLoadErrors) {
    TempDir dir;
    const auto lex = builtin_lexicon();
    csv::write_file(dir / "a.csv", "gender,keyword,WANA,XX\nman,smart,0.1,0.2\n");
    EXPECT_THROW(load_group_means_csv(dir / "a.csv", lex), LoadError);
    csv::write_file(dir / "b.csv", "gender,keyword,WANA\nman,unicorn,0.1\n");
    EXPECT_THROW(load_group_means_csv(dir / "b.csv", lex), LoadError);
    csv::write_file(dir / "c.csv", "gender,keyword,WANA\nman,smart,1.7\n");
    EXPECT_THROW(load_group_means_csv(dir / "c.csv", lex), LoadError);
    csv::write_file(dir / "d.csv", "gender,keyword,WANA\nboy,smart,0.1\n");
    try {
        load_group_means_csv(dir / "d.csv", lex);
        FAIL();
    } catch (const LoadError& e) {
        EXPECT_EQ(e.row(), 2u);
    }
}

// ---------------------------------------------------------------------------

TEST(SetSum, FixtureExamples) {
    const auto t = appendix();
    const auto man_neg = set_sum(t, Region::WANA, Gender::Man, KeywordSet::Traits, Subclass::Negative,
                                 AggregationMode::Reproduce);
    EXPECT_DOUBLE_EQ(man_neg.value, 0.98);
    const auto woman_neg = set_sum(t, Region::WANA, Gender::Woman, KeywordSet::Traits, Subclass::Negative,
                                   AggregationMode::Reproduce);
    EXPECT_DOUBLE_EQ(woman_neg.value, 1.00);
    const auto raw = set_sum(t, Region::WANA, Gender::Woman, KeywordSet::Traits, Subclass::Negative,
                             AggregationMode::Raw);
    EXPECT_NEAR(raw.value, 1.024, 1e-12);
    EXPECT_EQ(raw.mode, AggregationMode::Raw);
}

TEST(SetSum, ZeroMeans) {
    const auto lex = builtin_lexicon();
    GroupMeanTable t(lex.keywords());
    for (const auto& k : lex.select(KeywordSet::Occupations, Subclass::MaleDominated)) {
        t.set(Region::LA, Gender::Man, k.text, {0.0, 0.0, 1});
    }
    for (auto mode : {AggregationMode::Raw, AggregationMode::Reproduce}) {
        EXPECT_EQ(set_sum(t, Region::LA, Gender::Man, KeywordSet::Occupations, Subclass::MaleDominated, mode).value,
                  0.0);
    }
}

TEST(SetSum, ReproduceRoundsEachMeanFirst) {
    GroupMeanTable t(builtin_lexicon().keywords());
    // Each 0.1004 rounds to 0.100; raw sum 0.502 would round the same way,
    // so use values whose raw sum crosses a half-cent boundary.
    const double v = 0.1009;  // rounds to 0.101, five of them = 0.505 -> 0.51
    for (const auto& k : builtin_lexicon().select(KeywordSet::Traits, Subclass::Positive)) {
        t.set(Region::EE, Gender::Woman, k.text, {v, 0.0, 1});
    }
    const auto rep = set_sum(t, Region::EE, Gender::Woman, KeywordSet::Traits, Subclass::Positive,
                             AggregationMode::Reproduce);
    EXPECT_DOUBLE_EQ(rep.value, 0.51);
    const auto raw = set_sum(t, Region::EE, Gender::Woman, KeywordSet::Traits, Subclass::Positive,
                             AggregationMode::Raw);
    EXPECT_NEAR(raw.value, 0.5045, 1e-12);
}

TEST(SetSum, Errors) {
    const auto t = appendix();
    EXPECT_THROW(set_sum(t, Region::WANA, Gender::Man, KeywordSet::Traits, Subclass::Masculine,
                         AggregationMode::Raw),
                 ContractError);
    GroupMeanTable partial(builtin_lexicon().keywords());
    partial.set(Region::WANA, Gender::Man, "smart", {0.2, 0.0, 1});
    try {
        set_sum(partial, Region::WANA, Gender::Man, KeywordSet::Traits, Subclass::Positive, AggregationMode::Raw);
        FAIL();
    } catch (const ComputationError& e) {
        EXPECT_NE(std::string(e.what()).find("trustworthy"), std::string::npos);
    }
}

TEST(Trend, PrintedExamples) {
    const auto wana = trend(score(Region::WANA, Gender::Man, KeywordSet::Traits, Subclass::Positive, 0.90),
                            score(Region::WANA, Gender::Man, KeywordSet::Traits, Subclass::Negative, 0.98));
    EXPECT_NEAR(wana.trend, -0.08, 1e-12);
    EXPECT_EQ(wana.trend, 0.90 - 0.98);
    const auto ea = trend(score(Region::EA, Gender::Man, KeywordSet::Traits, Subclass::Positive, 0.92),
                          score(Region::EA, Gender::Man, KeywordSet::Traits, Subclass::Negative, 0.92));
    EXPECT_EQ(ea.trend, 0.0);
}

TEST(Trend, RejectsMismatchedInputs) {
    const auto pos = score(Region::WANA, Gender::Man, KeywordSet::Traits, Subclass::Positive, 0.9);
    auto neg = score(Region::WANA, Gender::Woman, KeywordSet::Traits, Subclass::Negative, 0.9);
    EXPECT_THROW(trend(pos, neg), ContractError);
    neg.gender = Gender::Man;
    neg.mode = AggregationMode::Raw;
    EXPECT_THROW(trend(pos, neg), ContractError);
    EXPECT_THROW(trend(neg, pos), ContractError);
}

TEST(GenderDifference, PrintedSums) {
    const auto traits =
        gender_difference(score(Region::WANA, Gender::Man, KeywordSet::Traits, Subclass::Positive, 0.90),
                          score(Region::WANA, Gender::Man, KeywordSet::Traits, Subclass::Negative, 0.98),
                          score(Region::WANA, Gender::Woman, KeywordSet::Traits, Subclass::Positive, 0.96),
                          score(Region::WANA, Gender::Woman, KeywordSet::Traits, Subclass::Negative, 1.00));
    EXPECT_NEAR(traits.value, 0.08, 1e-12);
    const auto occ = gender_difference(
        score(Region::WANA, Gender::Man, KeywordSet::Occupations, Subclass::MaleDominated, 0.96),
        score(Region::WANA, Gender::Man, KeywordSet::Occupations, Subclass::FemaleDominated, 0.90),
        score(Region::WANA, Gender::Woman, KeywordSet::Occupations, Subclass::MaleDominated, 0.93),
        score(Region::WANA, Gender::Woman, KeywordSet::Occupations, Subclass::FemaleDominated, 1.00));
    EXPECT_NEAR(occ.value, 0.07, 1e-12);
    EXPECT_EQ(occ.value, std::abs(occ.men_total - occ.women_total));
}

TEST(GenderDifference, SymmetricTableGivesZero) {
    GroupMeanTable t(builtin_lexicon().keywords());
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.15, 0.25);
    const auto lex = builtin_lexicon();
    for (const auto& k : lex.keywords()) {
        const double v = u(rng);
        t.set(Region::SSA, Gender::Man, k.text, {v, 0.0, 1});
        t.set(Region::SSA, Gender::Woman, k.text, {v, 0.0, 1});
    }
    for (auto set : kAllSets) {
        for (auto mode : {AggregationMode::Raw, AggregationMode::Reproduce}) {
            EXPECT_EQ(gender_difference(t, Region::SSA, set, mode).value, 0.0);
        }
    }
}

TEST(GenderDifference, RawAndReproduceStayWithinRoundingEnvelope) {
    const auto t = appendix();
    for (Region r : kAllRegions) {
        const auto raw = gender_difference(t, r, KeywordSet::Traits, AggregationMode::Raw);
        const auto rep = gender_difference(t, r, KeywordSet::Traits, AggregationMode::Reproduce);
        EXPECT_LT(std::abs(raw.value - rep.value), 0.03) << to_string(r);
        EXPECT_GE(raw.value, 0.0);
        for (Gender g : kAllGenders) {
            auto tr = [&](AggregationMode m) {
                return trend(set_sum(t, r, g, KeywordSet::Traits, Subclass::Positive, m),
                             set_sum(t, r, g, KeywordSet::Traits, Subclass::Negative, m))
                    .trend;
            };
            EXPECT_LT(std::abs(tr(AggregationMode::Raw) - tr(AggregationMode::Reproduce)), 0.03);
        }
    }
}

// ---------------------------------------------------------------------------

TEST(Pearson, PerfectLinearity) {
    const std::vector<double> xs{0.1, 0.4, 0.2, 0.9, 0.5};
    std::vector<double> up, down;
    for (double x : xs) {
        up.push_back(2 * x + 1);
        down.push_back(-x);
    }
    EXPECT_NEAR(pearson(xs, up).r, 1.0, 1e-12);
    EXPECT_EQ(pearson(xs, up).p, 0.0);
    EXPECT_NEAR(pearson(xs, down).r, -1.0, 1e-12);
}

TEST(Pearson, MatchesCovarianceOracleAndTSeries) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int fixture = 0; fixture < 100; ++fixture) {
        std::vector<double> xs(9), ys(9);
        for (auto& x : xs) x = u(rng);
        for (std::size_t i = 0; i < 9; ++i) ys[i] = 0.5 * xs[i] * (fixture % 3 - 1) + u(rng);
        const auto res = pearson(xs, ys);
        const double r = testing_support::plain_pearson(xs, ys);
        EXPECT_NEAR(res.r, r, 1e-12);
        const double t = r * std::sqrt(7.0 / (1.0 - r * r));
        EXPECT_NEAR(res.p, testing_support::t_two_tailed_series(t, 7), 1e-9);
        EXPECT_EQ(res.n, 9u);
        EXPECT_EQ(res.pairs.size(), 9u);
    }
}

TEST(Pearson, SeriesOracleAgreesWithBoost) {
    for (int df : {1, 2, 5, 7, 12}) {
        boost::math::students_t dist(df);
        for (double t : {0.1, 0.7, 2.3, 5.0}) {
            EXPECT_NEAR(testing_support::t_two_tailed_series(t, df), 2 * boost::math::cdf(complement(dist, t)),
                        1e-12);
        }
    }
}

TEST(Pearson, SymmetryAndAffineInvariance) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xs(9), ys(9);
        for (auto& x : xs) x = u(rng);
        for (auto& y : ys) y = u(rng);
        const auto base = pearson(xs, ys);
        EXPECT_NEAR(pearson(ys, xs).r, base.r, 1e-12);
        const double a = std::exp(u(rng) * 3), b = u(rng) * 10;
        std::vector<double> ax;
        for (double x : xs) ax.push_back(a * x + b);
        EXPECT_NEAR(pearson(ax, ys).r, base.r, 1e-12);
        EXPECT_NEAR(pearson(xs, ax).r, pearson(xs, xs).r, 1e-12);
        EXPECT_NEAR(pearson(ax, ys).p, base.p, 1e-9);
    }
}

TEST(Pearson, Errors) {
    EXPECT_THROW(pearson({1, 2, 3}, {1, 2}), ContractError);
    EXPECT_THROW(pearson({1, 2}, {1, 2}), ContractError);
    try {
        pearson({1, 1, 1}, {1, 2, 3});
        FAIL();
    } catch (const ComputationError& e) {
        EXPECT_NE(std::string(e.what()).find("zero variance"), std::string::npos);
    }
}

TEST(CorrelateWithIndex, PairsAndErrors) {
    auto regions = builtin_region_table();
    std::vector<GenderDifferenceScore> gd;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        regions[i].gggi = 0.6 + 0.02 * static_cast<double>(i);
        gd.push_back({regions[i].abbreviation, KeywordSet::Traits, 0, 0, -*regions[i].gggi,
                      AggregationMode::Raw});
    }
    const auto res = correlate_with_index(gd, regions);
    EXPECT_EQ(res.n, 9u);
    EXPECT_NEAR(res.r, -1.0, 1e-12);
    ASSERT_EQ(res.labels.size(), 9u);
    EXPECT_EQ(res.labels[0], "WANA");
    EXPECT_EQ(res.pairs[0].first, 0.6);

    for (auto& s : gd) s.value = 0.05;
    EXPECT_THROW(correlate_with_index(gd, regions), ComputationError);

    regions[2].gggi.reset();
    regions[7].gggi.reset();
    try {
        correlate_with_index(gd, regions);
        FAIL();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("WE"), std::string::npos);
        EXPECT_NE(msg.find("LA"), std::string::npos);
    }
}

TEST(AggregationMode, Names) {
    EXPECT_EQ(parse_aggregation_mode("raw"), AggregationMode::Raw);
    EXPECT_EQ(parse_aggregation_mode("reproduce"), AggregationMode::Reproduce);
    EXPECT_FALSE(parse_aggregation_mode("paper").has_value());
}
