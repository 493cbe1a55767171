#include "vlmaudit/pipeline.hpp"

#include <json.hpp>

#include "vlmaudit/csv.hpp"
#include "vlmaudit/embedding_cache.hpp"
#include "vlmaudit/error.hpp"
#include "vlmaudit/hash.hpp"

namespace vlmaudit {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + std::string(where));
        }
    }
}

template <typename T>
T get(const json& obj, const char* key, std::string_view where, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(where) + "." + key + " has the wrong type");
    }
}

json parse_json(std::string_view text, std::string_view what) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError(std::string(what) + " is not valid JSON");
    return j;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

BackendConfig backend_from_json(const json& j) {
    check_keys(j, "backend",
               {"kind", "checkpoint_name", "endpoint", "seed", "dim", "patch_grid", "region", "planted_associations",
                "timeout_seconds"});
    BackendConfig c;
    const auto kind = get<std::string>(j, "kind", "backend", "mock");
    auto parsed = parse_backend_kind(kind);
    if (!parsed) throw ConfigError("unknown backend kind '" + kind + "'");
    c.kind = *parsed;
    c.checkpoint_name = get<std::string>(j, "checkpoint_name", "backend", "");
    c.endpoint = get<std::string>(j, "endpoint", "backend", "");
    c.seed = get<std::uint64_t>(j, "seed", "backend", 0);
    c.dim = get<std::size_t>(j, "dim", "backend", c.dim);
    c.patch_grid = get<int>(j, "patch_grid", "backend", c.patch_grid);
    c.region = {0, 0, c.patch_grid, c.patch_grid};
    if (j.contains("region")) {
        const auto& r = j["region"];
        check_keys(r, "backend.region", {"row", "col", "rows", "cols"});
        c.region = {get<int>(r, "row", "backend.region", 0), get<int>(r, "col", "backend.region", 0),
                    get<int>(r, "rows", "backend.region", 1), get<int>(r, "cols", "backend.region", 1)};
    }
    if (j.contains("planted_associations")) {
        if (!j["planted_associations"].is_array()) throw ConfigError("backend.planted_associations must be a list");
        for (const auto& p : j["planted_associations"]) {
            check_keys(p, "planted association", {"content_tag", "prompt_substring", "margin"});
            c.planted_associations.push_back({get<std::string>(p, "content_tag", "planted association", ""),
                                              get<std::string>(p, "prompt_substring", "planted association", ""),
                                              get<double>(p, "margin", "planted association", 0.0)});
        }
    }
    c.timeout_seconds = get<double>(j, "timeout_seconds", "backend", c.timeout_seconds);
    if (c.kind == BackendKind::Pretrained && c.endpoint.empty()) {
        throw ConfigError("backend.endpoint is required for the pretrained backend");
    }
    if (c.timeout_seconds <= 0) throw ConfigError("backend.timeout_seconds must be positive");
    return c;
}

ojson backend_to_json(const BackendConfig& c) {
    ojson j;
    j["kind"] = to_string(c.kind);
    j["checkpoint_name"] = c.checkpoint_name;
    j["endpoint"] = c.endpoint;
    j["seed"] = c.seed;
    j["dim"] = c.dim;
    j["patch_grid"] = c.patch_grid;
    j["region"] = {{"row", c.region.row}, {"col", c.region.col}, {"rows", c.region.rows}, {"cols", c.region.cols}};
    auto plants = ojson::array();
    for (const auto& p : c.planted_associations) {
        plants.push_back({{"content_tag", p.content_tag}, {"prompt_substring", p.prompt_substring}, {"margin", p.margin}});
    }
    j["planted_associations"] = std::move(plants);
    j["timeout_seconds"] = c.timeout_seconds;
    return j;
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    } catch (const std::exception& e) {
        throw StageError(name, ComputationError(e.what()));
    }
}

}  // namespace

BackendConfig parse_backend_config(std::string_view json_text) {
    return backend_from_json(parse_json(json_text, "backend config"));
}

std::string backend_config_json(const BackendConfig& config) { return backend_to_json(config).dump(); }

std::string backend_config_hash(const BackendConfig& config) {
    // The endpoint and timeout only say where the model runs.
    auto j = backend_to_json(config);
    j.erase("endpoint");
    j.erase("timeout_seconds");
    return to_hex(sha256(j.dump()));
}

AuditConfig parse_audit_config(std::string_view json_text, const fs::path& base_dir) {
    const auto j = parse_json(json_text, "config");
    check_keys(j, "config", {"dataset", "lexicon", "backend", "analysis", "output"});
    AuditConfig c;

    const json empty = json::object();
    const auto& ds = j.contains("dataset") ? j["dataset"] : empty;
    check_keys(ds, "dataset", {"manifest", "expected_per_cell", "gggi"});
    const auto manifest = get<std::string>(ds, "manifest", "dataset", "");
    if (manifest.empty()) throw ConfigError("dataset.manifest is required");
    c.manifest_path = resolve(base_dir, manifest);
    c.expected_per_cell = get<std::size_t>(ds, "expected_per_cell", "dataset", c.expected_per_cell);
    if (ds.contains("gggi")) c.gggi_path = resolve(base_dir, get<std::string>(ds, "gggi", "dataset", ""));

    const auto& lex = j.contains("lexicon") ? j["lexicon"] : empty;
    check_keys(lex, "lexicon", {"path", "template"});
    if (lex.contains("path")) c.lexicon_path = resolve(base_dir, get<std::string>(lex, "path", "lexicon", ""));
    c.prompt_template = get<std::string>(lex, "template", "lexicon", c.prompt_template);
    if (c.prompt_template.empty()) throw ConfigError("lexicon.template must be non-empty");

    if (j.contains("backend")) c.backend = backend_from_json(j["backend"]);

    const auto& an = j.contains("analysis") ? j["analysis"] : empty;
    check_keys(an, "analysis", {"mode", "threads", "batch_size", "lenient"});
    const auto mode = get<std::string>(an, "mode", "analysis", "raw");
    auto parsed_mode = parse_aggregation_mode(mode);
    if (!parsed_mode) throw ConfigError("analysis.mode must be 'raw' or 'reproduce', got '" + mode + "'");
    c.mode = *parsed_mode;
    c.threads = get<std::size_t>(an, "threads", "analysis", c.threads);
    c.batch_size = get<std::size_t>(an, "batch_size", "analysis", c.batch_size);
    c.lenient = get<bool>(an, "lenient", "analysis", c.lenient);
    if (c.threads == 0 || c.batch_size == 0) throw ConfigError("analysis.threads and batch_size must be positive");

    const auto& out = j.contains("output") ? j["output"] : empty;
    check_keys(out, "output", {"dir", "formats", "cache_dir", "wall_clock_timestamp"});
    const auto dir = get<std::string>(out, "dir", "output", "");
    if (dir.empty()) throw ConfigError("output.dir is required");
    c.output_dir = resolve(base_dir, dir);
    if (out.contains("formats")) {
        c.formats.clear();
        for (const auto& f : get<std::vector<std::string>>(out, "formats", "output", {})) {
            auto parsed = parse_format(f);
            if (!parsed) throw ConfigError("unknown output format '" + f + "'");
            c.formats.insert(*parsed);
        }
    }
    if (out.contains("cache_dir")) c.cache_dir = resolve(base_dir, get<std::string>(out, "cache_dir", "output", ""));
    c.wall_clock_timestamp = get<bool>(out, "wall_clock_timestamp", "output", false);
    return c;
}

AuditConfig load_audit_config(const fs::path& path) {
    return parse_audit_config(csv::read_file(path), path.parent_path());
}

std::string audit_config_json(const AuditConfig& c) {
    ojson j;
    j["dataset"] = {{"manifest", c.manifest_path.generic_string()},
                    {"expected_per_cell", c.expected_per_cell},
                    {"gggi", c.gggi_path ? c.gggi_path->generic_string() : std::string()}};
    j["lexicon"] = {{"path", c.lexicon_path ? c.lexicon_path->generic_string() : std::string()},
                    {"template", c.prompt_template}};
    j["backend"] = backend_to_json(c.backend);
    j["analysis"] = {{"mode", to_string(c.mode)}, {"lenient", c.lenient}};
    return j.dump();
}

std::string audit_config_hash(const AuditConfig& config) { return to_hex(sha256(audit_config_json(config))); }

Dataset load_validated_dataset(const AuditConfig& config, ValidationReport* report) {
    auto ds = stage("load", [&] { return load_manifest(config.manifest_path); });
    return stage("validate", [&] {
        if (ds.empty()) throw ValidationError("manifest " + config.manifest_path.string() + " has no records");
        auto v = validate_dataset(ds, config.expected_per_cell);
        if (report) *report = v;
        if (!v.passed) {
            std::string msg = "cells not at " + std::to_string(config.expected_per_cell) + " images:";
            for (const auto& cell : v.failing_cells()) {
                msg += " " + std::string(to_string(cell.region)) + "/" + std::string(to_string(cell.gender)) + " (" +
                       std::to_string(cell.count) + ")";
            }
            throw ValidationError(msg);
        }
        for (const auto& rec : ds.records()) {
            if (!rec.materialized()) throw ValidationError("record " + rec.id + " has no image file");
        }
        return ds;
    });
}

Lexicon load_configured_lexicon(const AuditConfig& config) {
    return stage("lexicon", [&] { return config.lexicon_path ? load_lexicon(*config.lexicon_path) : builtin_lexicon(); });
}

std::vector<RegionSpec> load_configured_regions(const AuditConfig& config) {
    return stage("regions", [&] {
        auto regions = builtin_region_table();
        if (config.gggi_path) apply_gggi_overrides(regions, *config.gggi_path);
        return regions;
    });
}

fs::path cache_file(const AuditConfig& config) {
    if (!config.cache_dir) return {};
    return *config.cache_dir / ("embeddings-" + backend_config_hash(config.backend).substr(0, 16) + ".csv");
}

EncodedInputs encode_inputs(const AuditConfig& config, const Dataset& ds, const Lexicon& lex,
                            const Backend& backend) {
    return stage("encode", [&] {
        std::optional<EmbeddingCache> cache;
        const auto path = cache_file(config);
        if (!path.empty()) cache = EmbeddingCache::load(path);
        EncodeOptions opts;
        opts.batch_size = config.batch_size;
        opts.threads = config.threads;
        opts.lenient = config.lenient;
        opts.cache = cache ? &*cache : nullptr;
        EncodedInputs out;
        out.texts = encode_texts(build_prompts(lex.keywords(), config.prompt_template), backend, opts);
        out.images = encode_images(ds.records(), backend, opts);
        if (out.images.batch.size() == 0) throw ComputationError("no image could be encoded");
        if (cache) cache->save(path);
        return out;
    });
}

PipelineResult run_pipeline(const AuditConfig& config, const Backend& backend) {
    PipelineResult result;
    const auto ds = load_validated_dataset(config, &result.validation);
    const auto lex = load_configured_lexicon(config);
    const auto regions = load_configured_regions(config);
    const auto encoded = encode_inputs(config, ds, lex, backend);

    const auto matrix =
        stage("similarity", [&] { return similarity_matrix(encoded.images.batch, encoded.texts, config.threads); });
    result.report = stage("aggregate", [&] {
        Provenance prov;
        prov.backend_name = backend.info().name;
        prov.config_hash = audit_config_hash(config);
        prov.timestamp = provenance_timestamp(config.wall_clock_timestamp);
        if (config.backend.kind != BackendKind::Pretrained) prov.seed = config.backend.seed;
        auto report = build_report(group_means(matrix, ds, lex), config.mode,
                                   config.gggi_path ? &regions : nullptr, std::move(prov));
        for (const auto& f : encoded.images.failures) report.warnings.push_back("skipped " + f.id + ": " + f.message);
        return report;
    });
    result.artifacts = stage("emit", [&] { return emit_report(result.report, config.output_dir, config.formats); });
    return result;
}

PipelineResult run_pipeline(const AuditConfig& config) {
    const auto backend = stage("backend", [&] { return make_backend(config.backend); });
    return run_pipeline(config, *backend);
}

Table2 reproduce_appendix(const fs::path& fixture_path, AggregationMode mode) {
    const auto table = load_group_means_csv(fixture_path, builtin_lexicon());
    return make_table2(build_report(table, mode));
}

fs::path bundled_appendix_path() { return bundled_data_dir() / "appendix_a.csv"; }

}  // namespace vlmaudit
