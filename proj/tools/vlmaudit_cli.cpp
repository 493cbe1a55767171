#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "vlmaudit/csv.hpp"
#include "vlmaudit/dataset.hpp"
#include "vlmaudit/embedding_cache.hpp"
#include "vlmaudit/error.hpp"
#include "vlmaudit/hash.hpp"
#include "vlmaudit/pipeline.hpp"
#include "vlmaudit/saliency.hpp"

namespace fs = std::filesystem;
using namespace vlmaudit;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) out.push_back(item);
    return out;
}

FormatSet parse_formats(const std::string& list) {
    FormatSet out;
    for (const auto& f : split(list, ',')) {
        auto parsed = parse_format(f);
        if (!parsed) throw ConfigError("unknown format '" + f + "' (expected csv, json, png)");
        out.insert(*parsed);
    }
    return out;
}

AggregationMode parse_mode(const std::string& s) {
    auto m = parse_aggregation_mode(s);
    if (!m) throw ConfigError("mode must be 'raw' or 'reproduce'");
    return *m;
}

// Flags that mirror AuditConfig fields; unset flags leave the config file's
// value alone.
struct ConfigFlags {
    std::string config;
    std::string manifest, lexicon, template_text, gggi, output, formats, mode, cache_dir, backend_kind, endpoint,
        checkpoint;
    std::optional<std::size_t> expected, threads, dim;
    std::optional<std::uint64_t> seed;

    void add(CLI::App* app) {
        app->add_option("-c,--config", config, "Config JSON file");
        app->add_option("--manifest", manifest, "Manifest CSV");
        app->add_option("--expected-per-cell", expected, "Images expected per (region, gender) cell");
        app->add_option("--lexicon", lexicon, "Lexicon CSV (text,set,subclass)");
        app->add_option("--template", template_text, "Prompt template");
        app->add_option("--gggi", gggi, "Gender-gap index CSV (abbreviation,gggi)");
        app->add_option("--mode", mode, "raw or reproduce");
        app->add_option("--threads", threads, "Worker threads");
        app->add_option("-o,--output", output, "Output directory");
        app->add_option("--formats", formats, "Comma-separated subset of csv,json,png");
        app->add_option("--cache-dir", cache_dir, "Embedding cache directory");
        app->add_option("--backend", backend_kind, "pretrained, mock or patterned_mock");
        app->add_option("--endpoint", endpoint, "Model sidecar URL");
        app->add_option("--checkpoint", checkpoint, "Checkpoint name expected from the sidecar");
        app->add_option("--seed", seed, "Mock backend seed");
        app->add_option("--dim", dim, "Mock backend embedding dimension");
    }

    AuditConfig resolve() const {
        AuditConfig c;
        if (!config.empty()) {
            c = load_audit_config(config);
        } else {
            if (manifest.empty()) throw ConfigError("either --config or --manifest is required");
            if (output.empty()) throw ConfigError("either --config or --output is required");
        }
        if (!manifest.empty()) c.manifest_path = manifest;
        if (expected) c.expected_per_cell = *expected;
        if (!lexicon.empty()) c.lexicon_path = fs::path(lexicon);
        if (!template_text.empty()) c.prompt_template = template_text;
        if (!gggi.empty()) c.gggi_path = fs::path(gggi);
        if (!mode.empty()) c.mode = parse_mode(mode);
        if (threads) c.threads = *threads;
        if (!output.empty()) c.output_dir = output;
        if (!formats.empty()) c.formats = parse_formats(formats);
        if (!cache_dir.empty()) c.cache_dir = fs::path(cache_dir);
        if (!backend_kind.empty()) {
            auto k = parse_backend_kind(backend_kind);
            if (!k) throw ConfigError("unknown backend '" + backend_kind + "'");
            c.backend.kind = *k;
        }
        if (!endpoint.empty()) c.backend.endpoint = endpoint;
        if (!checkpoint.empty()) c.backend.checkpoint_name = checkpoint;
        if (seed) c.backend.seed = *seed;
        if (dim) c.backend.dim = *dim;
        if (c.threads == 0) throw ConfigError("--threads must be positive");
        return c;
    }
};

int cmd_plan(std::size_t quota, const std::string& out) {
    const auto plans = plan_queries(builtin_region_table(), quota);
    std::string text = "region,gender,term,egress_country,quota\n";
    for (const auto& p : plans) {
        text += csv::join({std::string(to_string(p.region)), std::string(to_string(p.gender)), p.term,
                           p.egress_country, std::to_string(p.quota)}) +
                "\n";
    }
    if (out.empty()) {
        std::cout << text;
    } else {
        csv::write_file(out, text);
        std::cout << "wrote " << plans.size() << " query plans to " << out << "\n";
    }
    return 0;
}

struct IngestFlags {
    std::string source = "synthetic";
    std::string root;
    std::string output;
    std::size_t quota = 70;
    std::uint64_t seed = 0;
    int size = 64;
    std::vector<std::string> tags;  // REGION:gender:tag
};

int cmd_ingest(const IngestFlags& f) {
    const auto plans = plan_queries(builtin_region_table(), f.quota);
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> tag_map;
    for (const auto& spec : f.tags) {
        const auto parts = split(spec, ':');
        if (parts.size() != 3) throw ConfigError("--tag expects REGION:gender:tag, got '" + spec + "'");
        auto r = parse_region(parts[0]);
        auto g = parse_gender(parts[1]);
        if (!r || !g) throw ConfigError("--tag: unknown cell '" + parts[0] + ":" + parts[1] + "'");
        for (const auto& p : plans) {
            if (p.region == *r && p.gender == *g) tag_map[{p.term, p.egress_country}].push_back(parts[2]);
        }
    }

    std::unique_ptr<FetcherAdapter> fetcher;
    if (f.source == "synthetic") {
        fetcher = std::make_unique<SyntheticFetcher>(
            f.seed, f.quota, f.size, f.size, [tag_map](const std::string& term, const std::string& egress) {
                auto it = tag_map.find({term, egress});
                return it == tag_map.end() ? std::vector<std::string>{} : it->second;
            });
    } else if (f.source == "directory") {
        if (f.root.empty()) throw ConfigError("--root is required for the directory source");
        fetcher = std::make_unique<DirectoryFetcher>(f.root, plans);
    } else {
        throw ConfigError("unknown source '" + f.source + "' (expected synthetic or directory)");
    }

    const auto report = fetch_images(plans, *fetcher, f.output);
    bool short_any = false;
    for (const auto& o : report.outcomes) {
        if (o.error || o.shortfall() > 0) {
            short_any = true;
            std::cerr << "warning: " << to_string(o.plan.region) << "/" << to_string(o.plan.gender) << " kept "
                      << o.kept << "/" << o.plan.quota << (o.error ? " (" + *o.error + ")" : "") << "\n";
        }
    }
    std::cout << "wrote " << report.dataset.size() << " records to " << report.manifest_path.string() << "\n";
    return short_any ? static_cast<int>(ExitCode::kValidationFailure) : 0;
}

int cmd_validate(const std::string& manifest, std::size_t expected) {
    const auto ds = load_manifest(manifest);
    const auto report = validate_dataset(ds, expected);
    for (const auto& cell : report.cells) {
        std::printf("%-5s %-6s %4zu/%zu %s\n", std::string(to_string(cell.region)).c_str(),
                    std::string(to_string(cell.gender)).c_str(), cell.count, expected,
                    cell.conformant ? "ok" : "FAIL");
    }
    std::printf("%s\n", report.passed ? "dataset conforms" : "dataset does not conform");
    return report.passed ? 0 : static_cast<int>(ExitCode::kValidationFailure);
}

int cmd_encode(AuditConfig config) {
    if (!config.cache_dir) config.cache_dir = config.output_dir / "cache";
    const auto ds = load_validated_dataset(config);
    const auto lex = load_configured_lexicon(config);
    const auto backend = make_backend(config.backend);
    const auto encoded = encode_inputs(config, ds, lex, *backend);
    for (const auto& f : encoded.images.failures) std::cerr << "warning: skipped " << f.id << ": " << f.message << "\n";
    std::cout << "encoded " << encoded.images.batch.size() << " images and " << encoded.texts.size()
              << " prompts with " << backend->info().name << " into " << cache_file(config).string() << "\n";
    return 0;
}

int cmd_score(const AuditConfig& config) {
    const auto result = run_pipeline(config);
    const auto& warnings = result.report.warnings;
    for (std::size_t i = 0; i < std::min<std::size_t>(warnings.size(), 5); ++i) {
        std::cerr << "warning: " << warnings[i] << "\n";
    }
    if (warnings.size() > 5) std::cerr << "warning: " << warnings.size() - 5 << " more (see report.json)\n";
    std::cout << format_table2_text(make_table2(result.report));
    for (const auto& [set, c] : result.report.correlations) {
        std::printf("%s: r=%.4f p=%.4g n=%zu\n", std::string(to_string(set)).c_str(), c.r, c.p, c.n);
    }
    for (const auto& p : result.artifacts) std::cout << "wrote " << p.string() << "\n";
    return 0;
}

int cmd_reproduce(const std::string& fixture, const std::string& mode, const std::string& out) {
    const fs::path path = fixture.empty() ? bundled_appendix_path() : fs::path(fixture);
    const auto table = reproduce_appendix(path, parse_mode(mode));
    std::cout << format_table2_text(table);
    if (!out.empty()) {
        const auto target = fs::path(out) / "table2.csv";
        csv::write_file(target, format_table2_csv(table));
        std::cout << "wrote " << target.string() << "\n";
    }
    return 0;
}

struct ReportFlags {
    std::string group_means;
    std::string gggi;
    std::string mode = "raw";
    std::string output;
    std::string formats = "csv,json,png";
};

int cmd_report(const ReportFlags& f) {
    const auto table = load_group_means_csv(f.group_means, builtin_lexicon());
    std::optional<std::vector<RegionSpec>> regions;
    if (!f.gggi.empty()) {
        regions = builtin_region_table();
        apply_gggi_overrides(*regions, f.gggi);
    }
    Provenance prov;
    prov.backend_name = "group-means:" + fs::path(f.group_means).filename().string();
    prov.config_hash = to_hex(sha256(csv::read_file(f.group_means)));
    prov.timestamp = provenance_timestamp(false);
    const auto report = build_report(table, parse_mode(f.mode), regions ? &*regions : nullptr, prov);
    for (const auto& p : emit_report(report, f.output, parse_formats(f.formats))) {
        std::cout << "wrote " << p.string() << "\n";
    }
    return 0;
}

struct SaliencyFlags {
    std::string image;
    std::string question;
    std::string backend_config;
    std::string kind = "patterned_mock";
    std::string endpoint;
    std::string checkpoint;
    std::uint64_t seed = 0;
    std::size_t dim = 64;
    std::string region;  // row,col,rows,cols
    std::string layer = std::string(kDefaultLayer);
    bool signed_map = false;
    double alpha = 0.5;
    std::string candidates = "halves";
    std::string output;
};

int cmd_saliency(const SaliencyFlags& f) {
    BackendConfig bc;
    if (!f.backend_config.empty()) {
        bc = parse_backend_config(csv::read_file(f.backend_config));
    } else {
        auto k = parse_backend_kind(f.kind);
        if (!k) throw ConfigError("unknown backend '" + f.kind + "'");
        bc.kind = *k;
        bc.endpoint = f.endpoint;
        bc.checkpoint_name = f.checkpoint;
        bc.seed = f.seed;
        bc.dim = f.dim;
        if (!f.region.empty()) {
            const auto parts = split(f.region, ',');
            if (parts.size() != 4) throw ConfigError("--region expects row,col,rows,cols");
            try {
                bc.region = {std::stoi(parts[0]), std::stoi(parts[1]), std::stoi(parts[2]), std::stoi(parts[3])};
            } catch (const std::exception&) {
                throw ConfigError("--region expects four integers");
            }
        }
    }
    const auto backend = make_backend(bc);
    const auto bytes = read_bytes(f.image);
    const auto decoded = decode_png(bytes);
    const auto q = make_question(f.question);
    const auto map = grad_cam(bytes, q, *backend, {f.layer, f.signed_map});

    std::vector<PixelRect> rects;
    if (f.candidates == "halves") {
        rects = halves(map.width, map.height);
    } else if (f.candidates == "quadrants") {
        rects = quadrants(map.width, map.height);
    } else if (f.candidates != "none") {
        throw ConfigError("--candidates must be halves, quadrants or none");
    }
    std::optional<AnswerRegion> answer;
    if (!rects.empty()) answer = answer_region(map, rects);

    const fs::path out_dir = f.output.empty() ? fs::path(".") : fs::path(f.output);
    const auto stem = fs::path(f.image).stem().string();
    const auto png_path = out_dir / (stem + "_saliency.png");
    const auto json_path = out_dir / (stem + "_saliency.json");
    write_bytes(png_path, encode_png(overlay(decoded.image, map, f.alpha)));
    csv::write_file(json_path, saliency_sidecar_json(stem, q, map, answer));
    std::printf("similarity %.6f\n", map.similarity);
    if (answer) {
        std::printf("answer region [%d,%d)x[%d,%d) mass %.4f\n", answer->bbox.x0, answer->bbox.x1, answer->bbox.y0,
                    answer->bbox.y1, answer->mass_fraction);
    }
    std::cout << "wrote " << png_path.string() << "\nwrote " << json_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regional gender-bias audit for image-text encoders"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    std::size_t plan_quota = 70;
    std::string plan_out;
    auto* plan = app.add_subcommand("plan", "Print the per-cell query plans");
    plan->add_option("--quota", plan_quota, "Images per (region, gender) cell");
    plan->add_option("-o,--output", plan_out, "Write the plans to this CSV");

    IngestFlags ingest_flags;
    auto* ingest = app.add_subcommand("ingest", "Fetch images and write a manifest");
    ingest->add_option("--source", ingest_flags.source, "synthetic or directory");
    ingest->add_option("--root", ingest_flags.root, "Root of <REGION>/<gender>/*.png for the directory source");
    ingest->add_option("-o,--output", ingest_flags.output, "Dataset directory")->required();
    ingest->add_option("--quota", ingest_flags.quota, "Images per cell");
    ingest->add_option("--seed", ingest_flags.seed, "Synthetic image seed");
    ingest->add_option("--size", ingest_flags.size, "Synthetic image edge in pixels");
    ingest->add_option("--tag", ingest_flags.tags, "REGION:gender:tag content tag for synthetic images");

    std::string validate_manifest;
    std::size_t validate_expected = 70;
    auto* validate = app.add_subcommand("validate", "Check cell counts of a manifest");
    validate->add_option("manifest", validate_manifest, "Manifest CSV")->required();
    validate->add_option("--expected-per-cell", validate_expected, "Images expected per cell");

    ConfigFlags encode_flags;
    auto* encode = app.add_subcommand("encode", "Encode images and prompts into the embedding cache");
    encode_flags.add(encode);

    ConfigFlags score_flags;
    auto* score = app.add_subcommand("score", "Run the full audit and write artifacts");
    score_flags.add(score);

    std::string fixture, reproduce_mode = "reproduce", reproduce_out;
    auto* reproduce = app.add_subcommand("reproduce-paper", "Rebuild the summary table from the bundled per-keyword means");
    reproduce->add_option("--fixture", fixture, "Per-keyword means CSV (default: bundled)");
    reproduce->add_option("--mode", reproduce_mode, "raw or reproduce");
    reproduce->add_option("-o,--output", reproduce_out, "Directory for table2.csv");

    SaliencyFlags sal;
    auto* saliency = app.add_subcommand("saliency", "Grad-CAM heatmap for an image and a question");
    saliency->add_option("image", sal.image, "PNG image")->required();
    saliency->add_option("-q,--question", sal.question, "Question text")->required();
    saliency->add_option("--backend-config", sal.backend_config, "Backend config JSON");
    saliency->add_option("--backend", sal.kind, "pretrained, mock or patterned_mock");
    saliency->add_option("--endpoint", sal.endpoint, "Model sidecar URL");
    saliency->add_option("--checkpoint", sal.checkpoint, "Checkpoint name");
    saliency->add_option("--seed", sal.seed, "Backend seed");
    saliency->add_option("--dim", sal.dim, "Backend dimension");
    saliency->add_option("--region", sal.region, "Patterned backend region row,col,rows,cols");
    saliency->add_option("--layer", sal.layer, "Layer selector");
    saliency->add_flag("--signed", sal.signed_map, "Keep negative contributions");
    saliency->add_option("--alpha", sal.alpha, "Overlay opacity");
    saliency->add_option("--candidates", sal.candidates, "halves, quadrants or none");
    saliency->add_option("-o,--output", sal.output, "Output directory");

    ReportFlags report_flags;
    auto* report = app.add_subcommand("report", "Emit tables and figures from a per-keyword means CSV");
    report->add_option("group_means", report_flags.group_means, "Group-means CSV")->required();
    report->add_option("--gggi", report_flags.gggi, "Gender-gap index CSV");
    report->add_option("--mode", report_flags.mode, "raw or reproduce");
    report->add_option("-o,--output", report_flags.output, "Output directory")->required();
    report->add_option("--formats", report_flags.formats, "Comma-separated subset of csv,json,png");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::kConfigError);
    }

    try {
        if (*plan) return cmd_plan(plan_quota, plan_out);
        if (*ingest) return cmd_ingest(ingest_flags);
        if (*validate) return cmd_validate(validate_manifest, validate_expected);
        if (*encode) return cmd_encode(encode_flags.resolve());
        if (*score) return cmd_score(score_flags.resolve());
        if (*reproduce) return cmd_reproduce(fixture, reproduce_mode, reproduce_out);
        if (*saliency) return cmd_saliency(sal);
        if (*report) return cmd_report(report_flags);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kRuntimeError);
    }
    return 0;
}
