#include <gtest/gtest.h>

#include <json.hpp>

#include "support.hpp"
#include "vlmaudit/csv.hpp"
#include "vlmaudit/error.hpp"
#include "vlmaudit/pipeline.hpp"

using namespace vlmaudit;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

AuditConfig small_config(const TempDir& dir, std::size_t per_cell = 4, std::uint64_t seed = 1) {
    AuditConfig cfg;
    cfg.manifest_path = testing_support::make_synthetic_dataset(dir / "data", per_cell, seed);
    cfg.expected_per_cell = per_cell;
    cfg.backend.kind = BackendKind::Mock;
    cfg.backend.seed = seed;
    cfg.backend.dim = 32;
    cfg.output_dir = dir / "out";
    return cfg;
}

std::set<std::string> listing(const fs::path& dir) {
    std::set<std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename().string());
    return out;
}

template <typename Fn>
StageError capture_stage_error(Fn fn) {
    try {
        fn();
    } catch (const StageError& e) {
        return e;
    }
    ADD_FAILURE() << "expected a StageError";
    return StageError("none", Error("none"));
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Config, ParsesSectionsAndResolvesPaths) {
    const auto cfg = parse_audit_config(R"({
        "dataset": {"manifest": "data/manifest.csv", "expected_per_cell": 10, "gggi": "/abs/gggi.csv"},
        "lexicon": {"template": "A photo of "},
        "backend": {"kind": "mock", "seed": 7, "dim": 128,
                    "planted_associations": [{"content_tag": "t", "prompt_substring": "fraud", "margin": 0.1}]},
        "analysis": {"mode": "reproduce", "threads": 3, "batch_size": 5, "lenient": true},
        "output": {"dir": "out", "formats": ["csv", "json"]}
    })",
                                        "/base");
    EXPECT_EQ(cfg.manifest_path, fs::path("/base/data/manifest.csv"));
    EXPECT_EQ(cfg.expected_per_cell, 10u);
    EXPECT_EQ(*cfg.gggi_path, fs::path("/abs/gggi.csv"));
    EXPECT_EQ(cfg.prompt_template, "A photo of ");
    EXPECT_EQ(cfg.backend.seed, 7u);
    EXPECT_EQ(cfg.backend.dim, 128u);
    ASSERT_EQ(cfg.backend.planted_associations.size(), 1u);
    EXPECT_EQ(cfg.backend.planted_associations[0].prompt_substring, "fraud");
    EXPECT_EQ(cfg.mode, AggregationMode::Reproduce);
    EXPECT_EQ(cfg.threads, 3u);
    EXPECT_TRUE(cfg.lenient);
    EXPECT_EQ(cfg.output_dir, fs::path("/base/out"));
    EXPECT_EQ(cfg.formats, (FormatSet{Format::Csv, Format::Json}));
}

TEST(Config, RejectsBadInput) {
    const std::string ok_tail = R"(, "output": {"dir": "o"}})";
    EXPECT_THROW(parse_audit_config("{not json"), ConfigError);
    EXPECT_THROW(parse_audit_config(R"({"dataset": {"manifest": "m"}, "extra": 1)" + ok_tail), ConfigError);
    EXPECT_THROW(parse_audit_config(R"({"dataset": {"manifest": "m", "cells": 1})" + ok_tail), ConfigError);
    EXPECT_THROW(parse_audit_config(R"({"dataset": {"manifest": "m"}, "analysis": {"mode": "paper"})" + ok_tail),
                 ConfigError);
    EXPECT_THROW(parse_audit_config(R"({"dataset": {"manifest": "m"}, "backend": {"kind": "clip"})" + ok_tail),
                 ConfigError);
    EXPECT_THROW(parse_audit_config(R"({"dataset": {"manifest": "m"}, "backend": {"dim": "big"})" + ok_tail),
                 ConfigError);
    EXPECT_THROW(parse_audit_config(R"({"dataset": {"manifest": "m"}, "output": {"dir": "o", "formats": ["gif"]}})"),
                 ConfigError);
    EXPECT_THROW(parse_audit_config(R"({"output": {"dir": "o"}})"), ConfigError);
}

TEST(Config, HashIgnoresOutputAndTransportSettings) {
    TempDir dir;
    auto a = small_config(dir);
    auto b = a;
    b.output_dir = "/elsewhere";
    b.formats = {Format::Csv};
    b.cache_dir = "/tmp/cache";
    EXPECT_EQ(audit_config_hash(a), audit_config_hash(b));
    b.backend.seed = 99;
    EXPECT_NE(audit_config_hash(a), audit_config_hash(b));
    b = a;
    b.mode = AggregationMode::Reproduce;
    EXPECT_NE(audit_config_hash(a), audit_config_hash(b));

    BackendConfig remote;
    remote.kind = BackendKind::Pretrained;
    remote.checkpoint_name = "ckpt";
    remote.endpoint = "http://a:1";
    auto moved = remote;
    moved.endpoint = "http://b:2";
    moved.timeout_seconds = 5;
    EXPECT_EQ(backend_config_hash(remote), backend_config_hash(moved));
    moved.checkpoint_name = "other";
    EXPECT_NE(backend_config_hash(remote), backend_config_hash(moved));
}

TEST(Config, BackendJsonRoundTrip) {
    BackendConfig c;
    c.kind = BackendKind::PatternedMock;
    c.seed = 3;
    c.dim = 48;
    c.patch_grid = 5;
    c.region = {1, 2, 3, 2};
    c.planted_associations = {{"a", "b", 0.2}};
    const auto back = parse_backend_config(backend_config_json(c));
    EXPECT_EQ(back.kind, c.kind);
    EXPECT_EQ(back.region, c.region);
    EXPECT_EQ(back.patch_grid, 5);
    EXPECT_EQ(back.planted_associations, c.planted_associations);
    EXPECT_EQ(backend_config_json(back), backend_config_json(c));
}

TEST(Config, LoadFromFile) {
    TempDir dir;
    csv::write_file(dir / "audit.json", R"({"dataset": {"manifest": "m.csv"}, "output": {"dir": "results"}})");
    const auto cfg = load_audit_config(dir / "audit.json");
    EXPECT_EQ(cfg.manifest_path, dir / "m.csv");
    EXPECT_EQ(cfg.output_dir, dir / "results");
    EXPECT_THROW(load_audit_config(dir / "missing.json"), Error);
}

// ---------------------------------------------------------------------------

TEST(Pipeline, CsvOnlyWritesTwoFiles) {
    TempDir dir;
    auto cfg = small_config(dir);
    cfg.formats = {Format::Csv};
    const auto result = run_pipeline(cfg);
    EXPECT_EQ(listing(cfg.output_dir), (std::set<std::string>{"group_means.csv", "table2.csv"}));
    EXPECT_EQ(result.artifacts.size(), 2u);
    EXPECT_TRUE(result.validation.passed);
}

TEST(Pipeline, FullCensusWithIndexValues) {
    TempDir dir;
    auto cfg = small_config(dir);
    cfg.gggi_path = testing_support::write_gggi_csv(dir / "gggi.csv");
    const auto result = run_pipeline(cfg);
    std::set<std::string> want{"group_means.csv", "table2.csv", "report.json"};
    for (auto set : kAllSets) {
        const std::string s(to_string(set));
        want.insert("scatter_" + s + ".csv");
        want.insert("scatter_" + s + ".png");
        want.insert("heatmap_" + s + "_man.png");
        want.insert("heatmap_" + s + "_woman.png");
    }
    EXPECT_EQ(listing(cfg.output_dir), want);
    EXPECT_EQ(result.report.correlations.size(), 3u);
    for (const auto& [set, c] : result.report.correlations) {
        EXPECT_EQ(c.n, 9u);
        EXPECT_LE(std::abs(c.r), 1.0);
    }

    const auto scatter = csv::parse(csv::read_file(cfg.output_dir / "scatter_traits.csv"));
    ASSERT_EQ(scatter.size(), 10u);
    EXPECT_EQ(scatter[0], (csv::Row{"region", "gggi", "gender_difference"}));

    const auto json = nlohmann::json::parse(csv::read_file(cfg.output_dir / "report.json"));
    EXPECT_EQ(json["provenance"]["backend"], result.report.provenance.backend_name);
    EXPECT_EQ(json["provenance"]["config_hash"], audit_config_hash(cfg));
    EXPECT_EQ(json["provenance"]["seed"], 1);
    EXPECT_EQ(json["group_means"].size(), 18u * 30u);
    EXPECT_EQ(json["trends"].size(), 18u);
    EXPECT_EQ(json["gender_differences"].size(), 27u);
}

TEST(Pipeline, RepeatedRunsAreByteIdentical) {
    TempDir dir;
    auto cfg = small_config(dir, 5, 3);
    cfg.gggi_path = testing_support::write_gggi_csv(dir / "gggi.csv");
    cfg.output_dir = dir / "a";
    run_pipeline(cfg);
    auto other = cfg;
    other.output_dir = dir / "b";
    other.threads = 4;
    other.batch_size = 3;
    run_pipeline(other);
    const auto names = listing(dir / "a");
    EXPECT_EQ(names, listing(dir / "b"));
    for (const auto& name : names) {
        EXPECT_EQ(read_bytes(dir / "a" / name), read_bytes(dir / "b" / name)) << name;
    }
    run_pipeline(cfg);
    EXPECT_EQ(listing(dir / "a"), names);
}

TEST(Pipeline, CacheRunMatchesUncachedRun) {
    TempDir dir;
    auto cfg = small_config(dir);
    cfg.formats = {Format::Json};
    run_pipeline(cfg);
    const auto plain = read_bytes(cfg.output_dir / "report.json");
    cfg.cache_dir = dir / "cache";
    run_pipeline(cfg);
    EXPECT_TRUE(fs::exists(cache_file(cfg)));
    run_pipeline(cfg);
    EXPECT_EQ(read_bytes(cfg.output_dir / "report.json"), plain);
}

TEST(Pipeline, EmptyManifestFailsValidation) {
    TempDir dir;
    AuditConfig cfg;
    cfg.manifest_path = dir / "empty.csv";
    csv::write_file(cfg.manifest_path, "id,region,gender,query_term,source_url,file_path,width,height\n");
    cfg.output_dir = dir / "out";
    const auto e = capture_stage_error([&] { run_pipeline(cfg); });
    EXPECT_EQ(e.stage(), "validate");
    EXPECT_EQ(e.exit_code(), ExitCode::kValidationFailure);
    EXPECT_TRUE(listing(cfg.output_dir).empty());
}

TEST(Pipeline, ShortCellNamesItAndWritesNothing) {
    TempDir dir;
    auto cfg = small_config(dir);
    auto ds = load_manifest(cfg.manifest_path);
    std::vector<ImageRecord> records;
    bool dropped = false;
    for (const auto& r : ds.records()) {
        if (!dropped && r.region == Region::SEA && r.gender == Gender::Woman) {
            dropped = true;
            continue;
        }
        records.push_back(r);
    }
    write_manifest(Dataset(records), cfg.manifest_path);
    const auto e = capture_stage_error([&] { run_pipeline(cfg); });
    EXPECT_EQ(e.stage(), "validate");
    EXPECT_NE(std::string(e.what()).find("SEA/woman"), std::string::npos);
    EXPECT_TRUE(listing(cfg.output_dir).empty());
}

TEST(Pipeline, StageErrorsCarryTheirStage) {
    TempDir dir;
    auto cfg = small_config(dir);
    cfg.backend.dim = 1;
    EXPECT_EQ(capture_stage_error([&] { run_pipeline(cfg); }).stage(), "backend");

    cfg = small_config(dir);
    cfg.manifest_path = dir / "nope.csv";
    EXPECT_EQ(capture_stage_error([&] { run_pipeline(cfg); }).stage(), "load");

    cfg = small_config(dir);
    const auto ds = load_manifest(cfg.manifest_path);
    write_bytes(ds.records()[2].file_path, std::vector<std::uint8_t>{1, 2, 3});
    const auto e = capture_stage_error([&] { run_pipeline(cfg); });
    EXPECT_EQ(e.stage(), "encode");
    EXPECT_NE(std::string(e.what()).find(ds.records()[2].id), std::string::npos);

    cfg.lenient = true;
    const auto result = run_pipeline(cfg);
    ASSERT_EQ(result.report.warnings.empty(), false);
    EXPECT_NE(result.report.warnings.back().find(ds.records()[2].id), std::string::npos);
}

TEST(Pipeline, PartialIndexValuesAreNamed) {
    TempDir dir;
    auto cfg = small_config(dir);
    cfg.formats = {Format::Csv};
    cfg.gggi_path = dir / "partial.csv";
    csv::write_file(*cfg.gggi_path, "abbreviation,gggi\nWANA,0.6\nNA,0.7\n");
    const auto e = capture_stage_error([&] { run_pipeline(cfg); });
    EXPECT_EQ(e.stage(), "aggregate");
    EXPECT_EQ(e.exit_code(), ExitCode::kConfigError);
    const std::string what = e.what();
    EXPECT_NE(what.find("SSA"), std::string::npos);
    EXPECT_EQ(what.find("WANA"), std::string::npos);
    EXPECT_TRUE(listing(cfg.output_dir).empty());
}

TEST(Pipeline, PlantedNegativeTraitsShowUpAsTrendGap) {
    TempDir dir;
    const std::set<Cell> tagged{{Region::WANA, Gender::Woman}, {Region::SA, Gender::Woman}, {Region::LA, Gender::Woman}};
    const double delta = 0.1;
    const auto gaps = testing_support::planted_trend_gaps(dir.path(), 21, delta, tagged, 30);
    for (Region r : kAllRegions) {
        if (tagged.count({r, Gender::Woman})) {
            EXPECT_NEAR(gaps.at(r), 5 * delta, 0.2 * 5 * delta) << to_string(r);
        } else {
            EXPECT_NEAR(gaps.at(r), 0.0, 0.05) << to_string(r);
        }
    }
}

// ---------------------------------------------------------------------------

TEST(Table2, BundledFixtureReproduction) {
    const auto t = reproduce_appendix(bundled_appendix_path());
    EXPECT_EQ(t.mode, AggregationMode::Reproduce);
    EXPECT_EQ(t.regions, std::vector<Region>(kTable2RegionOrder.begin(), kTable2RegionOrder.end()));
    EXPECT_DOUBLE_EQ(*t.value(KeywordSet::Traits, Gender::Man, "negative", Region::WANA), 0.98);
    EXPECT_DOUBLE_EQ(*t.value(KeywordSet::Traits, Gender::Woman, "negative", Region::WANA), 1.00);
    EXPECT_DOUBLE_EQ(*t.value(KeywordSet::Traits, Gender::Man, "positive", Region::EA), 0.92);
    EXPECT_NEAR(*t.value(KeywordSet::Traits, Gender::Man, "trend", Region::EA), 0.0, 1e-12);
    EXPECT_TRUE(t.find(KeywordSet::Traits, std::nullopt, "gender_difference"));
    EXPECT_FALSE(t.find(KeywordSet::Adjectives, Gender::Man, "masculine"));
    EXPECT_EQ(t.rows.size(), 7u);
}

TEST(Table2, CsvRoundTrip) {
    for (auto mode : {AggregationMode::Reproduce, AggregationMode::Raw}) {
        const auto t = reproduce_appendix(bundled_appendix_path(), mode);
        const auto text = format_table2_csv(t);
        auto back = parse_table2_csv(text);
        back.mode = t.mode;
        ASSERT_EQ(back.rows.size(), t.rows.size());
        EXPECT_EQ(back.regions, t.regions);
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            EXPECT_EQ(back.rows[i].set, t.rows[i].set);
            EXPECT_EQ(back.rows[i].gender, t.rows[i].gender);
            EXPECT_EQ(back.rows[i].type, t.rows[i].type);
            for (Region r : t.regions) {
                if (mode == AggregationMode::Raw) {
                    EXPECT_EQ(back.rows[i].values.at(r), t.rows[i].values.at(r));
                } else {
                    EXPECT_NEAR(back.rows[i].values.at(r), t.rows[i].values.at(r), 0.005 + 1e-12);
                }
            }
        }
        EXPECT_EQ(format_table2_csv(back), text);
    }
    const auto text = format_table2_csv(reproduce_appendix(bundled_appendix_path()));
    EXPECT_EQ(text.substr(0, text.find('\n')), "set,gender,type,WANA,EA,WE,NA,SA,SEA,EE,LA,SSA");
    EXPECT_EQ(text.find("-0.00"), std::string::npos);
}

TEST(Table2, MissingKeywordRowIsNamed) {
    TempDir dir;
    auto text = csv::read_file(bundled_appendix_path());
    const auto pos = text.find("man,gangster");
    text.erase(pos, text.find('\n', pos) - pos + 1);
    csv::write_file(dir / "cut.csv", text);
    try {
        reproduce_appendix(dir / "cut.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("gangster"), std::string::npos);
    }
}

TEST(Table2, TextRenderingListsEveryRegion) {
    const auto text = format_table2_text(reproduce_appendix(bundled_appendix_path()));
    for (Region r : kAllRegions) EXPECT_NE(text.find(std::string(to_string(r))), std::string::npos);
}

TEST(Report, ProvenanceTimestampFollowsSourceDateEpoch) {
    ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
    EXPECT_EQ(provenance_timestamp(false), "1970-01-02T00:00:00Z");
    ::setenv("SOURCE_DATE_EPOCH", "soon", 1);
    EXPECT_THROW(provenance_timestamp(false), ConfigError);
    ::unsetenv("SOURCE_DATE_EPOCH");
    EXPECT_EQ(provenance_timestamp(false), "1970-01-01T00:00:00Z");
    EXPECT_NE(provenance_timestamp(true), "1970-01-01T00:00:00Z");
}

TEST(Report, FormatNames) {
    for (auto f : {Format::Csv, Format::Json, Format::Png}) EXPECT_EQ(parse_format(to_string(f)), f);
    EXPECT_FALSE(parse_format("svg").has_value());
}

TEST(Report, EmitRejectsUnwritableDirectory) {
    TempDir dir;
    csv::write_file(dir / "file", "x");
    const auto report = build_report(load_group_means_csv(bundled_appendix_path(), builtin_lexicon()),
                                     AggregationMode::Raw);
    EXPECT_THROW(emit_report(report, dir / "file", {Format::Csv}), IoError);
    const auto written = emit_report(report, dir / "ok", {Format::Csv, Format::Png});
    EXPECT_EQ(written.size(), 4u);
    EXPECT_FALSE(fs::exists(dir / "ok" / ".incomplete"));
}
