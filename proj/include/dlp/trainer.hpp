#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dlp/corpus.hpp"
#include "dlp/model.hpp"
#include "dlp/strategies.hpp"

namespace dlp {

struct TrainItem {
    std::uint64_t id = 0;
    EncodedExample encoded;
    std::optional<double> dppl;
    std::optional<double> delta_ppl;
    std::optional<double> static_weight;  // materialized weight column, if any
};

struct TrainDataset {
    std::vector<TrainItem> items;
};

// Union of datasets sampled by mix weight (dataset first, then a uniform
// example within it).
struct TrainMixture {
    std::vector<TrainDataset> parts;
    std::vector<double> weights;  // positive; normalized internally

    static TrainMixture single(TrainDataset part);
};

TrainDataset make_train_dataset(const std::vector<DatasetRow>& rows, const ModelConfig& cfg);
TrainDataset make_train_dataset(const std::vector<Example>& examples, const ModelConfig& cfg);

struct BatchDraw {
    std::size_t part;
    std::size_t index;
    double weight;
};

struct TrainOptions {
    std::uint64_t steps = 0;
    std::size_t batch_size = 32;
    LrSchedule lr = LrSchedule::constant(0.01);
    // Added to the one-based step number before the lr lookup, so a resumed
    // run continues the schedule where the source checkpoint left off.
    std::uint64_t lr_step_offset = 0;
    StrategyConfig strategy;
    std::uint64_t sampling_seed = 0;
    int threads = 1;
    std::size_t max_resample = 1000;
    // Observation hook; receives the accepted draws of every step.
    std::function<void(std::uint64_t step, const std::vector<BatchDraw>&)> on_batch;
};

struct TrainResult {
    std::uint64_t steps = 0;
    double final_loss = 0.0;
    double mean_recent_loss = 0.0;  // mean over the last min(100, steps) steps
};

// Runs `steps` SGD steps in place. Strategy weights are evaluated at the
// zero-based step index (so curricula start at k(0) = 1); the learning rate at
// the one-based step number.
TrainResult train(TransducerParams& params, const ModelConfig& cfg, const TrainMixture& data,
                  const TrainOptions& opts);

// Replays an explicit per-step batch sequence (for trajectory-equivalence
// tests and debugging). Weights are taken as given.
TrainResult train_on_batches(TransducerParams& params, const ModelConfig& cfg,
                             const TrainMixture& data,
                             const std::vector<std::vector<BatchDraw>>& batches,
                             const LrSchedule& lr, int threads = 1);

// Categorical draw over normalized weights; exposed for mixture tests.
std::size_t sample_mixture_part(Rng& rng, const std::vector<double>& weights);

}  // namespace dlp
