#pragma once

// End-to-end runs: ingest -> cooccur -> embed -> eval -> classify, driven by
// one JSON config, with a manifest of every artifact written.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "commvec/classify.hpp"
#include "commvec/cooccur.hpp"
#include "commvec/embed.hpp"

namespace commvec::pipeline {

inline constexpr const char* kVersion = "0.1.0";

/// A stage failed; what() starts with "stage <name>: ".
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& diagnostic)
        : std::runtime_error("stage " + stage + ": " + diagnostic), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct IngestStage {
    bool enabled = true;
    /// Glob of NDJSON dumps (plain or .gz).
    std::string input;
    std::string bots;
    bool bot_suffix_heuristic = false;
    std::uint32_t min_comments = 10;
    std::size_t top = 10400;
    unsigned threads = 0;
};

struct CooccurStage {
    bool enabled = true;
    /// Memberships to read when the ingest stage is disabled; defaults to
    /// the ingest output inside out_dir.
    std::string memberships;
    std::string vocab;
    std::size_t max_memberships_per_user = 0;
    unsigned threads = 0;
};

struct EmbedStage {
    bool enabled = true;
    /// Matrix to read when the cooccur stage is disabled.
    std::string matrix;
    embed::EmbedConfig config;
    bool write_binary = true;
};

struct EvalSuite {
    std::string path;
    vecspace::SuiteType type = vecspace::SuiteType::composition;
};

struct EvalStage {
    bool enabled = false;
    std::string embeddings;
    std::vector<EvalSuite> suites;
    std::size_t k = 5;
};

struct ClassifyStage {
    bool enabled = false;
    std::string corpus;
    /// Embeddings for the neighborhood channel when the embed stage is
    /// disabled.
    std::string embeddings;
    std::vector<classify::ContextChannel> channels = {classify::ContextChannel::none, classify::ContextChannel::name,
                                                      classify::ContextChannel::neighborhood};
    /// Channel every other report is compared against.
    classify::ContextChannel baseline = classify::ContextChannel::none;
    classify::ExperimentConfig experiment;
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    bool deterministic = true;
    std::string out_dir = "out";
    /// Relative paths in the config resolve against this directory.
    std::filesystem::path base_dir = ".";

    IngestStage ingest;
    CooccurStage cooccur;
    EmbedStage embed;
    EvalStage eval;
    ClassifyStage classify;

    /// Pushes `seed` and `deterministic` into the per-stage blocks.
    void propagate();
    std::filesystem::path resolve(const std::string& path) const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Unknown keys are rejected so typos do not silently fall back to defaults.
void from_json(const nlohmann::json& j, PipelineConfig& c);

/// Reads a config file; relative paths resolve against its directory.
PipelineConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" overrides to a config JSON. `value` is parsed as
/// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& assignment);

struct Artifact {
    std::string path;  // relative to out_dir
    std::string checksum;
    std::uint64_t bytes = 0;
};

struct StageRecord {
    std::string name;
    std::vector<Artifact> inputs;  // paths as given in the config
    std::vector<Artifact> outputs;
};

struct Manifest {
    std::string version = kVersion;
    std::uint64_t seed = 0;
    bool deterministic = true;
    std::vector<StageRecord> stages;

    std::vector<Artifact> artifacts() const;
    nlohmann::json to_json() const;
};

/// Layout of stage outputs inside out_dir.
struct Layout {
    static constexpr const char* activity = "ingest/activity.tsv";
    static constexpr const char* memberships = "ingest/memberships.tsv";
    static constexpr const char* vocab = "ingest/vocab.tsv";
    static constexpr const char* ingest_report = "ingest/ingest_report.json";
    static constexpr const char* matrix = "cooccur/matrix.bin";
    static constexpr const char* cooccur_report = "cooccur/cooccur_report.json";
    static constexpr const char* embeddings_text = "embed/embeddings.txt";
    static constexpr const char* embeddings_binary = "embed/embeddings.bin";
    static constexpr const char* loss_trace = "embed/loss_trace.json";
    static constexpr const char* resolved_config = "config.resolved.json";
    static constexpr const char* manifest = "manifest.json";
};

using Logger = std::function<void(const std::string&)>;

/// Runs the enabled stages in dependency order. Writes the resolved config
/// and manifest.json into out_dir and returns the manifest.
Manifest run_pipeline(const PipelineConfig& config, const Logger& log = {});

}  // namespace commvec::pipeline
