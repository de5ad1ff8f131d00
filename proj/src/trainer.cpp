#include "dlp/trainer.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace dlp {

TrainMixture TrainMixture::single(TrainDataset part) {
    TrainMixture m;
    m.parts.push_back(std::move(part));
    m.weights.push_back(1.0);
    return m;
}

TrainDataset make_train_dataset(const std::vector<DatasetRow>& rows, const ModelConfig& cfg) {
    TrainDataset d;
    d.items.reserve(rows.size());
    for (const auto& r : rows)
        d.items.push_back({r.example.id, encode(cfg, r.example), r.dppl, r.delta_ppl,
                           r.example.weight});
    return d;
}

TrainDataset make_train_dataset(const std::vector<Example>& examples, const ModelConfig& cfg) {
    TrainDataset d;
    d.items.reserve(examples.size());
    for (const auto& e : examples) d.items.push_back({e.id, encode(cfg, e), {}, {}, e.weight});
    return d;
}

std::size_t sample_mixture_part(Rng& rng, const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("mixture weights must be non-negative");
        sum += w;
    }
    if (sum <= 0.0) throw std::invalid_argument("mixture weights must have positive sum");
    if (weights.size() == 1) return 0;
    const double u = rng.uniform_real() * sum;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;
}

namespace {

void validate_mixture(const TrainMixture& data) {
    if (data.parts.empty() || data.parts.size() != data.weights.size())
        throw std::invalid_argument("mixture parts and weights must be non-empty and aligned");
    for (const auto& p : data.parts)
        if (p.items.empty()) throw std::invalid_argument("mixture contains an empty dataset");
}

double strategy_weight(const TrainItem& item, std::uint64_t t0, const StrategyConfig& strategy) {
    const double base = item.static_weight.value_or(1.0);
    if (strategy.kind == StrategyKind::Unscored) return base;
    if (!item.dppl)
        throw std::runtime_error("example " + std::to_string(item.id) + ": dppl required by strategy " +
                                 std::string(to_string(strategy.kind)));
    return base * example_weight(*item.dppl, t0, strategy, item.delta_ppl);
}

struct StepRunner {
    const ModelConfig& cfg;
    const TrainMixture& data;
    int threads;
    Gradients grads;
    std::vector<WeightedExample> batch_view;

    explicit StepRunner(const ModelConfig& c, const TrainMixture& d, int th)
        : cfg(c), data(d), threads(th), grads(TransducerParams::zeros(c)) {}

    double step(TransducerParams& params, const std::vector<BatchDraw>& draws, double lr) {
        batch_view.clear();
        for (const auto& d : draws)
            batch_view.push_back({&data.parts[d.part].items[d.index].encoded, d.weight});
        const double loss = loss_and_grad(params, cfg, batch_view, grads, threads);
        sgd_step(params, grads, lr);
        return loss;
    }
};

TrainResult finish(std::uint64_t steps, const std::vector<double>& losses) {
    TrainResult r;
    r.steps = steps;
    if (!losses.empty()) {
        r.final_loss = losses.back();
        const std::size_t window = std::min<std::size_t>(100, losses.size());
        double sum = 0.0;
        for (std::size_t i = losses.size() - window; i < losses.size(); ++i) sum += losses[i];
        r.mean_recent_loss = sum / static_cast<double>(window);
    }
    return r;
}

}  // namespace

TrainResult train(TransducerParams& params, const ModelConfig& cfg, const TrainMixture& data,
                  const TrainOptions& opts) {
    validate_mixture(data);
    opts.strategy.validate();
    if (opts.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    Rng rng(derive_seed(opts.sampling_seed, /*stream=*/0x7a11));
    StepRunner runner(cfg, data, opts.threads);
    std::vector<double> losses;
    losses.reserve(opts.steps);
    std::vector<BatchDraw> draws;

    for (std::uint64_t step = 1; step <= opts.steps; ++step) {
        const std::uint64_t t0 = step - 1;  // strategy clock
        draws.clear();
        if (opts.strategy.batch_mode == BatchMode::ResampleToFill &&
            opts.strategy.kind != StrategyKind::Unscored) {
            // Reject zero-weight draws per slot, bounded retries.
            for (std::size_t slot = 0; slot < opts.batch_size; ++slot) {
                std::size_t tries = 0;
                while (true) {
                    if (++tries > opts.max_resample)
                        throw std::runtime_error(
                            "strategy " + std::string(to_string(opts.strategy.kind)) +
                            " produced empty effective data at step " + std::to_string(t0));
                    const std::size_t part = sample_mixture_part(rng, data.weights);
                    const std::size_t index = rng.uniform_index(data.parts[part].items.size());
                    const double w = strategy_weight(data.parts[part].items[index], t0, opts.strategy);
                    if (w > 0.0) {
                        draws.push_back({part, index, w});
                        break;
                    }
                }
            }
        } else {
            // Uniform draws with weights multiplied into the loss. A batch with
            // all-zero weights is redrawn, bounded retries.
            std::size_t tries = 0;
            while (true) {
                if (++tries > opts.max_resample)
                    throw std::runtime_error("strategy " + std::string(to_string(opts.strategy.kind)) +
                                             " produced empty effective data at step " +
                                             std::to_string(t0));
                draws.clear();
                bool any = false;
                for (std::size_t slot = 0; slot < opts.batch_size; ++slot) {
                    const std::size_t part = sample_mixture_part(rng, data.weights);
                    const std::size_t index = rng.uniform_index(data.parts[part].items.size());
                    const double w = strategy_weight(data.parts[part].items[index], t0, opts.strategy);
                    any = any || w > 0.0;
                    draws.push_back({part, index, w});
                }
                if (any) break;
            }
        }
        if (opts.on_batch) opts.on_batch(step, draws);
        losses.push_back(runner.step(params, draws, lr_at(opts.lr, opts.lr_step_offset + step)));
    }
    return finish(opts.steps, losses);
}

TrainResult train_on_batches(TransducerParams& params, const ModelConfig& cfg,
                             const TrainMixture& data,
                             const std::vector<std::vector<BatchDraw>>& batches,
                             const LrSchedule& lr, int threads) {
    validate_mixture(data);
    StepRunner runner(cfg, data, threads);
    std::vector<double> losses;
    losses.reserve(batches.size());
    std::uint64_t step = 0;
    for (const auto& draws : batches) {
        ++step;
        losses.push_back(runner.step(params, draws, lr_at(lr, step)));
    }
    return finish(step, losses);
}

}  // namespace dlp
