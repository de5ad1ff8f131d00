#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dlp/corpus.hpp"
#include "dlp/rng.hpp"

namespace dlp {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ModelConfig {
    std::string vocab = "abcdefghijklmnopqrstuvwxyz ";  // PAD is appended internally
    int embed_dim = 16;
    int hidden_dim = 64;
    int window = 2;  // radius; the input window spans 2*window+1 characters
    double init_scale = 0.1;
    std::uint64_t seed = 0;

    int vocab_size() const { return static_cast<int>(vocab.size()) + 1; }
    int pad_index() const { return static_cast<int>(vocab.size()); }
    int input_dim() const { return (2 * window + 1) * embed_dim; }

    void validate() const;
    int char_index(char c) const;  // throws on out-of-vocabulary characters

    // Architecture digest: vocab and shape fields. The init seed is excluded so
    // that separately-initialized models of the same architecture (ensembles,
    // replicas) share a hash.
    std::uint64_t digest() const;

    bool operator==(const ModelConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct TransducerParams {
    std::vector<double> embed;  // [vocab_size][embed_dim]
    std::vector<double> w1;     // [input_dim][hidden_dim]
    std::vector<double> b1;     // [hidden_dim]
    std::vector<double> w2;     // [hidden_dim][vocab_size]
    std::vector<double> b2;     // [vocab_size]

    static TransducerParams zeros(const ModelConfig& cfg);
    // uniform(-init_scale, +init_scale), drawn from cfg.seed
    static TransducerParams init(const ModelConfig& cfg);
    static TransducerParams init(const ModelConfig& cfg, std::uint64_t seed);

    std::size_t size() const;
    bool all_finite() const;
    void set_zero();
    void axpy(double a, const TransducerParams& other);  // *this += a * other

    struct TensorRef {
        std::string_view name;
        std::vector<double>* data;
        std::vector<std::size_t> dims;
    };
    std::vector<TensorRef> tensors(const ModelConfig& cfg);

    bool operator==(const TransducerParams&) const = default;
};

using Gradients = TransducerParams;

// ---------------------------------------------------------------------------
// Encoded examples (vocabulary indices, computed once per example)
// ---------------------------------------------------------------------------

struct EncodedExample {
    std::vector<int> source;
    std::vector<int> target;
};

EncodedExample encode(const ModelConfig& cfg, const Example& ex);
std::vector<int> encode_chars(const ModelConfig& cfg, std::string_view s);

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

// Scratch buffers reused across forward/backward calls.
struct ModelWorkspace {
    std::vector<double> hidden;
    std::vector<double> logits;
    std::vector<double> dhidden;
    std::vector<double> dlogits;
};

// Total log-probability of target given source: sum over positions of
// log softmax(W2' tanh(W1' x_t + b1) + b2)[target_t]. Always <= 0.
double log_prob(const TransducerParams& params, const ModelConfig& cfg, const Example& ex);
double log_prob(const TransducerParams& params, const ModelConfig& cfg, const EncodedExample& enc,
                ModelWorkspace& ws);

// Accumulates coeff * d(-log_prob)/dtheta into grads and returns -log_prob.
double nll_and_accumulate_grad(const TransducerParams& params, const ModelConfig& cfg,
                               const EncodedExample& enc, double coeff, Gradients& grads,
                               ModelWorkspace& ws);

struct EmptyBatchError : std::runtime_error {
    EmptyBatchError() : std::runtime_error("empty effective batch: all weights are zero") {}
};

struct WeightedExample {
    const EncodedExample* example;
    double weight;
};

// Weighted-mean batch loss: sum_x w_x * nll_x / sum_x w_x, with exact grads.
// Throws EmptyBatchError when the weights sum to zero.
double loss_and_grad(const TransducerParams& params, const ModelConfig& cfg,
                     std::span<const WeightedExample> batch, Gradients& grads, int threads = 1);
// Convenience overload over raw examples (encodes internally).
double loss_and_grad(const TransducerParams& params, const ModelConfig& cfg,
                     const std::vector<std::pair<Example, double>>& batch, Gradients& grads);

// params <- params - lr * grads. Throws on non-finite gradients.
void sgd_step(TransducerParams& params, const Gradients& grads, double lr);

// ---------------------------------------------------------------------------
// Learning-rate schedules
// ---------------------------------------------------------------------------

struct LrSchedule {
    enum class Kind { WarmupInvSqrt, Constant };
    Kind kind = Kind::Constant;
    double lr0 = 0.0;                 // WarmupInvSqrt
    std::uint64_t warmup_steps = 1;   // WarmupInvSqrt
    double lr = 0.0;                  // Constant

    static LrSchedule warmup_invsqrt(double lr0, std::uint64_t warmup_steps);
    static LrSchedule constant(double lr);
};

double lr_at(const LrSchedule& schedule, std::uint64_t t);  // t >= 1

// ---------------------------------------------------------------------------
// Decoding and ensembles
// ---------------------------------------------------------------------------

// Mean of per-model logits at position t. All models must share the config.
std::vector<double> ensemble_logits(std::span<const TransducerParams* const> models,
                                    const ModelConfig& cfg, const std::vector<int>& source,
                                    std::size_t t);

// Greedy per-position decoding with a scalar identity threshold: emit the
// argmax character only when it beats copying the source character by at
// least tau in log-probability.
std::string decode(const TransducerParams& params, const ModelConfig& cfg, std::string_view source,
                   double tau);
std::string decode_ensemble(std::span<const TransducerParams* const> models, const ModelConfig& cfg,
                            std::string_view source, double tau);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// Max relative error between analytic gradients and central finite
// differences. max_coords == 0 checks every coordinate; otherwise a seeded
// random subsample of that many coordinates is used.
double grad_check(const TransducerParams& params, const ModelConfig& cfg, const Example& ex,
                  double eps, std::size_t max_coords = 0, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct Checkpoint {
    TransducerParams params;
    ModelConfig config;
    std::uint64_t step = 0;
    std::string stage_name;

    std::uint64_t config_hash() const { return config.digest(); }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dlp
