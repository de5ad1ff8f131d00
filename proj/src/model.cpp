#include "dlp/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_set>

#include <json.hpp>

#include "dlp/parallel.hpp"

namespace dlp {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
    if (embed_dim < 1 || hidden_dim < 1 || window < 1)
        throw std::invalid_argument("model dims must be >= 1");
    if (vocab.empty()) throw std::invalid_argument("vocab must be non-empty");
    if (init_scale < 0.0) throw std::invalid_argument("init_scale must be non-negative");
    std::unordered_set<char> seen;
    for (char c : vocab) {
        if (c == '\t' || c == '\n') throw std::invalid_argument("vocab cannot contain tab/newline");
        if (!seen.insert(c).second) throw std::invalid_argument("vocab characters must be unique");
    }
}

int ModelConfig::char_index(char c) const {
    const auto pos = vocab.find(c);
    if (pos == std::string::npos)
        throw std::runtime_error(std::string("out-of-vocabulary character: '") + c + "'");
    return static_cast<int>(pos);
}

std::uint64_t ModelConfig::digest() const {
    std::uint64_t h = fnv1a(vocab.data(), vocab.size());
    const std::uint64_t shape[3] = {static_cast<std::uint64_t>(embed_dim),
                                    static_cast<std::uint64_t>(hidden_dim),
                                    static_cast<std::uint64_t>(window)};
    h = fnv1a(shape, sizeof(shape), h);
    const std::uint64_t scale_bits = std::bit_cast<std::uint64_t>(init_scale);
    return fnv1a(&scale_bits, sizeof(scale_bits), h);
}

// ---------------------------------------------------------------------------
// Params
// ---------------------------------------------------------------------------

TransducerParams TransducerParams::zeros(const ModelConfig& cfg) {
    cfg.validate();
    TransducerParams p;
    const std::size_t v = cfg.vocab_size();
    p.embed.assign(v * cfg.embed_dim, 0.0);
    p.w1.assign(static_cast<std::size_t>(cfg.input_dim()) * cfg.hidden_dim, 0.0);
    p.b1.assign(cfg.hidden_dim, 0.0);
    p.w2.assign(static_cast<std::size_t>(cfg.hidden_dim) * v, 0.0);
    p.b2.assign(v, 0.0);
    return p;
}

TransducerParams TransducerParams::init(const ModelConfig& cfg) { return init(cfg, cfg.seed); }

TransducerParams TransducerParams::init(const ModelConfig& cfg, std::uint64_t seed) {
    TransducerParams p = zeros(cfg);
    Rng rng(derive_seed(seed, /*stream=*/0x1417));
    const double s = cfg.init_scale;
    for (auto* tensor : {&p.embed, &p.w1, &p.b1, &p.w2, &p.b2})
        for (double& x : *tensor) x = rng.uniform_real(-s, s);
    return p;
}

std::size_t TransducerParams::size() const {
    return embed.size() + w1.size() + b1.size() + w2.size() + b2.size();
}

bool TransducerParams::all_finite() const {
    for (const auto* tensor : {&embed, &w1, &b1, &w2, &b2})
        for (double x : *tensor)
            if (!std::isfinite(x)) return false;
    return true;
}

void TransducerParams::set_zero() {
    for (auto* tensor : {&embed, &w1, &b1, &w2, &b2}) std::fill(tensor->begin(), tensor->end(), 0.0);
}

void TransducerParams::axpy(double a, const TransducerParams& other) {
    auto add = [a](std::vector<double>& dst, const std::vector<double>& src) {
        if (dst.size() != src.size()) throw std::invalid_argument("axpy: shape mismatch");
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
    };
    add(embed, other.embed);
    add(w1, other.w1);
    add(b1, other.b1);
    add(w2, other.w2);
    add(b2, other.b2);
}

std::vector<TransducerParams::TensorRef> TransducerParams::tensors(const ModelConfig& cfg) {
    const std::size_t v = cfg.vocab_size();
    const std::size_t d = cfg.embed_dim;
    const std::size_t h = cfg.hidden_dim;
    const std::size_t in = cfg.input_dim();
    return {
        {"embed", &embed, {v, d}}, {"w1", &w1, {in, h}}, {"b1", &b1, {h}},
        {"w2", &w2, {h, v}},       {"b2", &b2, {v}},
    };
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

std::vector<int> encode_chars(const ModelConfig& cfg, std::string_view s) {
    std::vector<int> out;
    out.reserve(s.size());
    for (char c : s) out.push_back(cfg.char_index(c));
    return out;
}

EncodedExample encode(const ModelConfig& cfg, const Example& ex) {
    if (ex.source.size() != ex.target.size())
        throw std::runtime_error("example " + std::to_string(ex.id) + ": |source| != |target| (" +
                                 std::to_string(ex.source.size()) + " vs " +
                                 std::to_string(ex.target.size()) + ")");
    return {encode_chars(cfg, ex.source), encode_chars(cfg, ex.target)};
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace {

void ensure_workspace(const ModelConfig& cfg, ModelWorkspace& ws) {
    ws.hidden.resize(cfg.hidden_dim);
    ws.logits.resize(cfg.vocab_size());
    ws.dhidden.resize(cfg.hidden_dim);
    ws.dlogits.resize(cfg.vocab_size());
}

// hidden = tanh(W1' x + b1), logits = W2' hidden + b2 for the window at
// position t. Returns log-sum-exp of the logits.
double forward_position(const TransducerParams& p, const ModelConfig& cfg,
                        const std::vector<int>& src, std::size_t t, ModelWorkspace& ws) {
    const int d = cfg.embed_dim;
    const int h = cfg.hidden_dim;
    const int v = cfg.vocab_size();
    const int w = cfg.window;
    const int n = static_cast<int>(src.size());
    double* hid = ws.hidden.data();
    std::copy(p.b1.begin(), p.b1.end(), hid);
    for (int k = -w; k <= w; ++k) {
        const int pos = static_cast<int>(t) + k;
        const int idx = (pos >= 0 && pos < n) ? src[pos] : cfg.pad_index();
        const double* emb = p.embed.data() + static_cast<std::size_t>(idx) * d;
        const double* w1row = p.w1.data() + static_cast<std::size_t>(k + w) * d * h;
        for (int i = 0; i < d; ++i) {
            const double x = emb[i];
            const double* row = w1row + static_cast<std::size_t>(i) * h;
            for (int j = 0; j < h; ++j) hid[j] += x * row[j];
        }
    }
    for (int j = 0; j < h; ++j) hid[j] = std::tanh(hid[j]);
    double* logits = ws.logits.data();
    std::copy(p.b2.begin(), p.b2.end(), logits);
    for (int j = 0; j < h; ++j) {
        const double hj = hid[j];
        const double* row = p.w2.data() + static_cast<std::size_t>(j) * v;
        for (int c = 0; c < v; ++c) logits[c] += hj * row[c];
    }
    double maxv = logits[0];
    for (int c = 1; c < v; ++c) maxv = std::max(maxv, logits[c]);
    double sum = 0.0;
    for (int c = 0; c < v; ++c) sum += std::exp(logits[c] - maxv);
    return maxv + std::log(sum);
}

}  // namespace

double log_prob(const TransducerParams& p, const ModelConfig& cfg, const EncodedExample& enc,
                ModelWorkspace& ws) {
    ensure_workspace(cfg, ws);
    double lp = 0.0;
    for (std::size_t t = 0; t < enc.source.size(); ++t) {
        const double lse = forward_position(p, cfg, enc.source, t, ws);
        lp += ws.logits[enc.target[t]] - lse;
    }
    return lp;
}

double log_prob(const TransducerParams& p, const ModelConfig& cfg, const Example& ex) {
    ModelWorkspace ws;
    return log_prob(p, cfg, encode(cfg, ex), ws);
}

double nll_and_accumulate_grad(const TransducerParams& p, const ModelConfig& cfg,
                               const EncodedExample& enc, double coeff, Gradients& g,
                               ModelWorkspace& ws) {
    ensure_workspace(cfg, ws);
    const int d = cfg.embed_dim;
    const int h = cfg.hidden_dim;
    const int v = cfg.vocab_size();
    const int w = cfg.window;
    const int n = static_cast<int>(enc.source.size());
    double nll = 0.0;
    for (int t = 0; t < n; ++t) {
        const double lse = forward_position(p, cfg, enc.source, t, ws);
        const int tgt = enc.target[t];
        nll -= ws.logits[tgt] - lse;

        // dlogits = coeff * (softmax - onehot(target))
        double* dlogits = ws.dlogits.data();
        for (int c = 0; c < v; ++c) dlogits[c] = coeff * std::exp(ws.logits[c] - lse);
        dlogits[tgt] -= coeff;

        const double* hid = ws.hidden.data();
        double* dhid = ws.dhidden.data();
        std::fill(dhid, dhid + h, 0.0);
        for (int j = 0; j < h; ++j) {
            const double hj = hid[j];
            double* gw2 = g.w2.data() + static_cast<std::size_t>(j) * v;
            const double* w2row = p.w2.data() + static_cast<std::size_t>(j) * v;
            double acc = 0.0;
            for (int c = 0; c < v; ++c) {
                gw2[c] += hj * dlogits[c];
                acc += w2row[c] * dlogits[c];
            }
            dhid[j] = acc;
        }
        for (int c = 0; c < v; ++c) g.b2[c] += dlogits[c];

        // through tanh
        for (int j = 0; j < h; ++j) dhid[j] *= 1.0 - hid[j] * hid[j];
        for (int j = 0; j < h; ++j) g.b1[j] += dhid[j];

        for (int k = -w; k <= w; ++k) {
            const int pos = t + k;
            const int idx = (pos >= 0 && pos < n) ? enc.source[pos] : cfg.pad_index();
            const double* emb = p.embed.data() + static_cast<std::size_t>(idx) * d;
            double* gemb = g.embed.data() + static_cast<std::size_t>(idx) * d;
            const std::size_t base = static_cast<std::size_t>(k + w) * d * h;
            for (int i = 0; i < d; ++i) {
                const double x = emb[i];
                double* gw1 = g.w1.data() + base + static_cast<std::size_t>(i) * h;
                const double* w1row = p.w1.data() + base + static_cast<std::size_t>(i) * h;
                double acc = 0.0;
                for (int j = 0; j < h; ++j) {
                    gw1[j] += x * dhid[j];
                    acc += w1row[j] * dhid[j];
                }
                gemb[i] += acc;
            }
        }
    }
    return nll;
}

double loss_and_grad(const TransducerParams& p, const ModelConfig& cfg,
                     std::span<const WeightedExample> batch, Gradients& grads, int threads) {
    double weight_sum = 0.0;
    for (const auto& item : batch) {
        if (item.weight < 0.0 || item.weight > 1.0)
            throw std::invalid_argument("example weight outside [0,1]");
        weight_sum += item.weight;
    }
    if (weight_sum <= 0.0) throw EmptyBatchError();

    grads = TransducerParams::zeros(cfg);
    // Per-example gradient buffers reduced in index order so the result is
    // independent of the thread count.
    std::vector<Gradients> slots(batch.size(), TransducerParams::zeros(cfg));
    std::vector<double> nlls(batch.size(), 0.0);
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        ModelWorkspace ws;
        if (batch[i].weight > 0.0)
            nlls[i] = nll_and_accumulate_grad(p, cfg, *batch[i].example,
                                              batch[i].weight / weight_sum, slots[i], ws);
    });
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        loss += batch[i].weight / weight_sum * nlls[i];
        if (batch[i].weight > 0.0) grads.axpy(1.0, slots[i]);
    }
    return loss;
}

double loss_and_grad(const TransducerParams& p, const ModelConfig& cfg,
                     const std::vector<std::pair<Example, double>>& batch, Gradients& grads) {
    std::vector<EncodedExample> encoded;
    encoded.reserve(batch.size());
    for (const auto& [ex, _] : batch) encoded.push_back(encode(cfg, ex));
    std::vector<WeightedExample> view;
    view.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) view.push_back({&encoded[i], batch[i].second});
    return loss_and_grad(p, cfg, view, grads);
}

void sgd_step(TransducerParams& params, const Gradients& grads, double lr) {
    if (lr < 0.0) throw std::invalid_argument("learning rate must be non-negative");
    if (!grads.all_finite()) throw std::runtime_error("training aborted: non-finite gradients");
    params.axpy(-lr, grads);
}

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

LrSchedule LrSchedule::warmup_invsqrt(double lr0, std::uint64_t warmup_steps) {
    if (lr0 <= 0.0) throw std::invalid_argument("lr0 must be positive");
    if (warmup_steps < 1) throw std::invalid_argument("warmup_steps must be >= 1");
    LrSchedule s;
    s.kind = Kind::WarmupInvSqrt;
    s.lr0 = lr0;
    s.warmup_steps = warmup_steps;
    return s;
}

LrSchedule LrSchedule::constant(double lr) {
    if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
    LrSchedule s;
    s.kind = Kind::Constant;
    s.lr = lr;
    return s;
}

double lr_at(const LrSchedule& schedule, std::uint64_t t) {
    if (t < 1) throw std::invalid_argument("lr_at: step must be >= 1");
    switch (schedule.kind) {
        case LrSchedule::Kind::Constant:
            return schedule.lr;
        case LrSchedule::Kind::WarmupInvSqrt:
            if (t <= schedule.warmup_steps) return schedule.lr0;
            return schedule.lr0 * std::sqrt(static_cast<double>(schedule.warmup_steps) /
                                            static_cast<double>(t));
    }
    throw std::logic_error("unreachable schedule kind");
}

// ---------------------------------------------------------------------------
// Decoding / ensembles
// ---------------------------------------------------------------------------

std::vector<double> ensemble_logits(std::span<const TransducerParams* const> models,
                                    const ModelConfig& cfg, const std::vector<int>& source,
                                    std::size_t t) {
    if (models.empty()) throw std::invalid_argument("ensemble requires at least one model");
    ModelWorkspace ws;
    ensure_workspace(cfg, ws);
    std::vector<double> mean(cfg.vocab_size(), 0.0);
    for (const auto* m : models) {
        forward_position(*m, cfg, source, t, ws);
        for (int c = 0; c < cfg.vocab_size(); ++c) mean[c] += ws.logits[c];
    }
    const double inv = 1.0 / static_cast<double>(models.size());
    for (double& x : mean) x *= inv;
    return mean;
}

std::string decode_ensemble(std::span<const TransducerParams* const> models, const ModelConfig& cfg,
                            std::string_view source, double tau) {
    const auto src = encode_chars(cfg, source);
    std::string out;
    out.reserve(source.size());
    const int pad = cfg.pad_index();
    for (std::size_t t = 0; t < src.size(); ++t) {
        const auto logits = ensemble_logits(models, cfg, src, t);
        // argmax over emittable characters (PAD is never emitted)
        int best = -1;
        for (int c = 0; c < cfg.vocab_size(); ++c) {
            if (c == pad) continue;
            if (best < 0 || logits[c] > logits[best]) best = c;
        }
        const int src_c = src[t];
        if (best == src_c || logits[best] - logits[src_c] >= tau)
            out.push_back(cfg.vocab[best]);
        else
            out.push_back(cfg.vocab[src_c]);
    }
    return out;
}

std::string decode(const TransducerParams& params, const ModelConfig& cfg, std::string_view source,
                   double tau) {
    const TransducerParams* single[1] = {&params};
    return decode_ensemble(single, cfg, source, tau);
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

double grad_check(const TransducerParams& params, const ModelConfig& cfg, const Example& ex,
                  double eps, std::size_t max_coords, std::uint64_t seed) {
    if (eps <= 0.0) throw std::invalid_argument("eps must be positive");
    const EncodedExample enc = encode(cfg, ex);
    Gradients analytic = TransducerParams::zeros(cfg);
    ModelWorkspace ws;
    nll_and_accumulate_grad(params, cfg, enc, 1.0, analytic, ws);

    TransducerParams probe = params;
    auto tensors = probe.tensors(cfg);
    auto grad_tensors = analytic.tensors(cfg);
    const std::size_t total = probe.size();
    std::vector<std::size_t> coords;
    if (max_coords == 0 || max_coords >= total) {
        coords.resize(total);
        for (std::size_t i = 0; i < total; ++i) coords[i] = i;
    } else {
        Rng rng(derive_seed(seed, 0x9c0de));
        std::unordered_set<std::size_t> chosen;
        while (chosen.size() < max_coords) chosen.insert(rng.uniform_index(total));
        coords.assign(chosen.begin(), chosen.end());
        std::sort(coords.begin(), coords.end());
    }

    double max_rel = 0.0;
    for (std::size_t flat : coords) {
        std::size_t offset = flat;
        std::size_t ti = 0;
        while (offset >= tensors[ti].data->size()) {
            offset -= tensors[ti].data->size();
            ++ti;
        }
        double& x = (*tensors[ti].data)[offset];
        const double saved = x;
        x = saved + eps;
        const double fp = -log_prob(probe, cfg, enc, ws);
        x = saved - eps;
        const double fm = -log_prob(probe, cfg, enc, ws);
        x = saved;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = (*grad_tensors[ti].data)[offset];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'D', 'L', 'P', 'C', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

void write_string(std::ostream& out, std::string_view s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error("truncated checkpoint");
    return s;
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return {{"vocab", cfg.vocab},       {"embed_dim", cfg.embed_dim},
            {"hidden_dim", cfg.hidden_dim}, {"window", cfg.window},
            {"init_scale", cfg.init_scale}, {"seed", cfg.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.vocab = j.at("vocab").get<std::string>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.window = j.at("window").get<int>();
    cfg.init_scale = j.at("init_scale").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    write_u64(out, ckpt.config_hash());
    write_u64(out, ckpt.step);
    write_string(out, ckpt.stage_name);
    write_string(out, config_to_json(ckpt.config).dump());
    auto tensors = const_cast<TransducerParams&>(ckpt.params).tensors(ckpt.config);
    write_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        write_string(out, t.name);
        write_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (std::size_t dim : t.dims) write_u64(out, dim);
        for (double x : *t.data) write_f64(out, x);
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed on '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("'" + path + "' is not a DLPC1 checkpoint");
    Checkpoint ckpt;
    const std::uint64_t stored_hash = read_u64(in);
    ckpt.step = read_u64(in);
    ckpt.stage_name = read_string(in);
    ckpt.config = config_from_json(nlohmann::json::parse(read_string(in)));
    if (ckpt.config.digest() != stored_hash)
        throw std::runtime_error("'" + path + "': config digest mismatch");
    ckpt.params = TransducerParams::zeros(ckpt.config);
    auto tensors = ckpt.params.tensors(ckpt.config);
    const std::uint32_t count = read_u32(in);
    if (count != tensors.size()) throw std::runtime_error("'" + path + "': unexpected tensor count");
    for (auto& t : tensors) {
        const std::string name = read_string(in);
        if (name != t.name) throw std::runtime_error("'" + path + "': unexpected tensor '" + name + "'");
        const std::uint32_t ndims = read_u32(in);
        if (ndims != t.dims.size()) throw std::runtime_error("'" + path + "': tensor rank mismatch");
        std::size_t total = 1;
        for (std::uint32_t i = 0; i < ndims; ++i) {
            const std::uint64_t dim = read_u64(in);
            if (dim != t.dims[i]) throw std::runtime_error("'" + path + "': tensor shape mismatch");
            total *= dim;
        }
        for (std::size_t i = 0; i < total; ++i) (*t.data)[i] = read_f64(in);
    }
    return ckpt;
}

}  // namespace dlp
