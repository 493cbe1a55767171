#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vlmaudit/dataset.hpp"
#include "vlmaudit/encoder.hpp"
#include "vlmaudit/report.hpp"

namespace vlmaudit {

// Config file sections:
//   dataset  {manifest, expected_per_cell?, gggi?}
//   lexicon  {path?, template?}
//   backend  see BackendConfig
//   analysis {mode?, threads?, batch_size?, lenient?}
//   output   {dir, formats?, cache_dir?, wall_clock_timestamp?}
// Relative paths resolve against the config file's directory.
struct AuditConfig {
    std::filesystem::path manifest_path;
    std::size_t expected_per_cell = 70;
    std::optional<std::filesystem::path> gggi_path;
    std::optional<std::filesystem::path> lexicon_path;
    std::string prompt_template = std::string(kDefaultTemplate);
    BackendConfig backend;
    AggregationMode mode = AggregationMode::Raw;
    std::size_t threads = 1;
    std::size_t batch_size = 32;
    bool lenient = false;
    std::filesystem::path output_dir;
    FormatSet formats = {Format::Csv, Format::Json, Format::Png};
    std::optional<std::filesystem::path> cache_dir;
    bool wall_clock_timestamp = false;
};

BackendConfig parse_backend_config(std::string_view json_text);
std::string backend_config_json(const BackendConfig& config);
std::string backend_config_hash(const BackendConfig& config);

AuditConfig parse_audit_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
AuditConfig load_audit_config(const std::filesystem::path& path);
// Canonical JSON of everything that affects results (the output section is
// left out) and its SHA-256.
std::string audit_config_json(const AuditConfig& config);
std::string audit_config_hash(const AuditConfig& config);

// Stage helpers, also used by the CLI subcommands.
Dataset load_validated_dataset(const AuditConfig& config, ValidationReport* report = nullptr);
Lexicon load_configured_lexicon(const AuditConfig& config);
std::vector<RegionSpec> load_configured_regions(const AuditConfig& config);
std::filesystem::path cache_file(const AuditConfig& config);

struct EncodedInputs {
    EmbeddingBatch texts;
    ImageEncoding images;
};
EncodedInputs encode_inputs(const AuditConfig& config, const Dataset& ds, const Lexicon& lex,
                            const Backend& backend);

struct PipelineResult {
    AuditReport report;
    ValidationReport validation;
    std::vector<std::filesystem::path> artifacts;
};

// load -> validate -> encode -> similarity -> aggregate -> correlate -> emit.
// Failures surface as StageError naming the stage; artifacts are only moved
// into the output directory once every one of them was written.
PipelineResult run_pipeline(const AuditConfig& config);
// Same, with an already constructed backend.
PipelineResult run_pipeline(const AuditConfig& config, const Backend& backend);

// Summary table rebuilt from a per-keyword group-means CSV.
Table2 reproduce_appendix(const std::filesystem::path& fixture_path,
                          AggregationMode mode = AggregationMode::Reproduce);
std::filesystem::path bundled_appendix_path();

}  // namespace vlmaudit
