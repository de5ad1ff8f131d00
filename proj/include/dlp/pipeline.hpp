#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlp/corpus.hpp"
#include "dlp/evalreport.hpp"
#include "dlp/model.hpp"
#include "dlp/strategies.hpp"

namespace dlp {

enum class StageAction { Train, Finetune, Continue, Score, ApplyStrategy, Eval };

std::string_view to_string(StageAction a);
StageAction stage_action_from_string(std::string_view s);

struct DataRef {
    std::string ref;     // file path, "scored:<stage>" or "weighted:<stage>"
    double weight = 1.0;
};

struct StageSpec {
    std::string name;
    StageAction action = StageAction::Train;
    std::vector<DataRef> data;
    std::string init;  // "fresh" or a previous stage name; train defaults to fresh
    std::uint64_t steps = 0;
    std::optional<std::size_t> batch_size;
    std::optional<LrSchedule> lr;
    StrategyConfig strategy;

    // action == Score
    std::string score_base;
    std::string score_theta_minus;
    std::string score_theta_plus;
    std::string score_out;  // file name within the replica directory
    bool normalize_by_length = false;

    // action == ApplyStrategy
    std::uint64_t at_step = 0;
    std::string out;  // materialized weighted file name

    // action == Eval
    double tau = 0.0;
};

struct ExperimentSpec {
    std::uint64_t seed = 0;
    int replicas = 4;
    ModelConfig model;
    std::size_t batch_size = 32;
    int threads = 1;
    std::vector<StageSpec> stages;
    std::string base_dir;  // directory for resolving relative data paths

    void validate() const;

    static ExperimentSpec from_json(const nlohmann::json& j, const std::string& base_dir);
    static ExperimentSpec load(const std::string& path);
    nlohmann::json to_json() const;
    std::uint64_t digest() const;
};

struct MetricRow {
    int replica;  // -1 for the cross-replica mean
    std::string stage;
    std::string metric;
    double value;
};

struct RunManifest {
    std::uint64_t spec_digest = 0;
    nlohmann::json json;
    std::vector<MetricRow> metrics;

    std::optional<double> metric(int replica, const std::string& stage,
                                 const std::string& metric_name) const;
    // Cross-replica mean of a per-stage metric.
    std::optional<double> mean_metric(const std::string& stage, const std::string& metric_name) const;
};

// Per-stage seed derivation, shared with the CLI verbs so a scripted
// stage-by-stage run reproduces a pipeline run bit-exactly.
std::uint64_t stage_init_seed(std::uint64_t replica_seed, std::string_view stage);
std::uint64_t stage_sampling_seed(std::uint64_t replica_seed, std::string_view stage);

// Executes every stage for every replica (replica r runs on seed + r) and
// writes checkpoints, scored files, manifest.json and metrics.tsv under
// out_dir. Paths inside the manifest are relative to out_dir.
RunManifest run_experiment(const ExperimentSpec& spec, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Nested halving
// ---------------------------------------------------------------------------

struct NestedHalves {
    // levels[0] is the input dataset; each later level is a stratified random
    // half of the previous one, order-preserving.
    std::vector<std::vector<DatasetRow>> levels;
    bool stopped_early = false;
    std::string warning;
};

NestedHalves nested_halves(const std::vector<DatasetRow>& dataset, std::size_t levels,
                           const std::vector<GroupKey>& strata, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepCell {
    nlohmann::json value;
    std::string out_dir;
    std::optional<RunManifest> manifest;  // nullopt when the cell failed
    std::string error;
};

struct SweepResult {
    std::vector<SweepCell> cells;
};

// One full experiment per value; `axis` is a JSON pointer into the spec
// template (e.g. "/stages/0/strategy/kind"). Cell failures are isolated.
// Writes summary.tsv (mean eval metrics per cell) under out_root.
SweepResult sweep(const nlohmann::json& spec_template, const std::string& axis,
                  const std::vector<nlohmann::json>& values, const std::string& out_root,
                  const std::string& base_dir);

}  // namespace dlp
