// Acceptance gate: one self-contained check per release criterion, each
// printing a single pass/fail line. Run all with no arguments or a single
// one with --criterion N (matching the ctest registration).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlp/corpus.hpp"
#include "dlp/evalreport.hpp"
#include "dlp/model.hpp"
#include "dlp/pipeline.hpp"
#include "dlp/scoring.hpp"
#include "dlp/strategies.hpp"
#include "dlp/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dlp;

namespace {

// ---------------------------------------------------------------------------
// Desk-scale constants (pilot-tuned; see README for the runtime budget)
// ---------------------------------------------------------------------------

constexpr std::size_t kBatch = 16;
constexpr std::uint64_t kPretrainSteps = 800;
constexpr std::uint64_t kFinetuneSteps = 500;
constexpr double kCorruptRate = 0.08;
constexpr double kTau = 0.0;

LrSchedule pretrain_lr() { return LrSchedule::warmup_invsqrt(0.1, 100); }
LrSchedule finetune_lr() { return LrSchedule::constant(0.02); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("dlp_acceptance_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<Example> gen_origin(std::string_view preset, std::size_t count, std::uint64_t seed) {
    MixtureSpec spec;
    spec.origins.push_back(origin_preset(preset, count, kCorruptRate));
    return make_dataset(spec, seed);
}

OriginSpec mixed_origin(std::size_t count) {
    OriginSpec o;
    o.name = "mixed";
    o.count = count;
    o.proportions = {{QualityClass::CleanCorrection, 0.40},
                     {QualityClass::InfoChange, 0.20},
                     {QualityClass::PartialCorrection, 0.20},
                     {QualityClass::BadEdit, 0.20}};
    o.corruption = CorruptionConfig::uniform_length_preserving(kCorruptRate);
    return o;
}

Checkpoint train_fresh(const ModelConfig& cfg, const std::vector<Example>& data,
                       std::uint64_t init_seed, std::uint64_t sampling_seed, std::uint64_t steps,
                       const LrSchedule& lr, int threads, const std::string& stage) {
    auto params = TransducerParams::init(cfg, init_seed);
    TrainOptions opts;
    opts.steps = steps;
    opts.batch_size = kBatch;
    opts.lr = lr;
    opts.sampling_seed = sampling_seed;
    opts.threads = threads;
    train(params, cfg, TrainMixture::single(make_train_dataset(data, cfg)), opts);
    return Checkpoint{std::move(params), cfg, steps, stage};
}

Checkpoint finetune_from(const Checkpoint& base, const std::vector<Example>& data,
                         std::uint64_t sampling_seed, int threads, const std::string& stage) {
    auto params = base.params;
    TrainOptions opts;
    opts.steps = kFinetuneSteps;
    opts.batch_size = kBatch;
    opts.lr = finetune_lr();
    opts.sampling_seed = sampling_seed;
    opts.threads = threads;
    train(params, base.config, TrainMixture::single(make_train_dataset(data, base.config)), opts);
    return Checkpoint{std::move(params), base.config, base.step + kFinetuneSteps, stage};
}

struct ThetaPair {
    Checkpoint minus;
    Checkpoint plus;
};

// Scorer construction used by criteria 3, 7 and 10: a general model trained on
// noisy crowd-style data, then a copy finetuned on a small trusted set.
ThetaPair make_theta_pair(std::uint64_t seed, int threads) {
    ModelConfig cfg;
    const auto pool = gen_origin("crowd-like", 4000, derive_seed(seed, 101));
    const auto trusted = gen_origin("trusted", 2000, derive_seed(seed, 102));
    ThetaPair pair;
    pair.minus = train_fresh(cfg, pool, derive_seed(seed, 1), derive_seed(seed, 2), kPretrainSteps,
                             pretrain_lr(), threads, "pretrain");
    pair.plus = finetune_from(pair.minus, trusted, derive_seed(seed, 3), threads, "finetune");
    return pair;
}

EvalReport eval_checkpoint(const Checkpoint& ckpt, const std::vector<Example>& data) {
    std::vector<std::string> sources, hyps, refs;
    for (const auto& ex : data) {
        sources.push_back(ex.source);
        refs.push_back(ex.target);
        hyps.push_back(decode(ckpt.params, ckpt.config, ex.source, kTau));
    }
    return edit_f_beta(sources, hyps, refs, 0.5);
}

// ---------------------------------------------------------------------------
// The paired experiment behind criteria 8 and 10: a score-aware soft pretrain
// arrangement vs its unscored control, both followed by the same finetune.
// ---------------------------------------------------------------------------

void write_experiment_inputs(const fs::path& dir) {
    write_dataset((dir / "pool.tsv").string(), gen_origin("crowd-like", 6000, 7101));
    write_dataset((dir / "trusted.tsv").string(), gen_origin("trusted", 1500, 7102));
    write_dataset((dir / "heldout.tsv").string(), gen_origin("trusted", 800, 7103));
}

json lr_json(const LrSchedule& s) {
    if (s.kind == LrSchedule::Kind::Constant) return {{"kind", "constant"}, {"lr", s.lr}};
    return {{"kind", "warmup_invsqrt"}, {"lr0", s.lr0}, {"warmup_steps", s.warmup_steps}};
}

json scored_arrangement_spec(int threads) {
    return {
        {"seed", 9000},
        {"replicas", 4},
        {"batch_size", kBatch},
        {"threads", threads},
        {"stages",
         json::array(
             {{{"name", "seed_pre"},
               {"action", "train"},
               {"data", json::array({{{"ref", "pool.tsv"}}})},
               {"steps", kPretrainSteps},
               {"lr", lr_json(pretrain_lr())}},
              {{"name", "seed_ft"},
               {"action", "finetune"},
               {"init", "seed_pre"},
               {"data", json::array({{{"ref", "trusted.tsv"}}})},
               {"steps", kFinetuneSteps},
               {"lr", lr_json(finetune_lr())}},
              {{"name", "sc"},
               {"action", "score"},
               {"score_args",
                {{"base", "pool.tsv"}, {"theta_minus", "seed_pre"}, {"theta_plus", "seed_ft"}}}},
              {{"name", "soft_pre"},
               {"action", "train"},
               {"data", json::array({{{"ref", "scored:sc"}}})},
               {"steps", kPretrainSteps},
               {"lr", lr_json(pretrain_lr())},
               {"strategy", {{"kind", "soft"}}}},
              {{"name", "ev_pre"},
               {"action", "eval"},
               {"init", "soft_pre"},
               {"data", json::array({{{"ref", "heldout.tsv"}}})},
               {"tau", kTau}},
              {{"name", "ft"},
               {"action", "finetune"},
               {"init", "soft_pre"},
               {"data", json::array({{{"ref", "trusted.tsv"}}})},
               {"steps", kFinetuneSteps},
               {"lr", lr_json(finetune_lr())}},
              {{"name", "ev_post"},
               {"action", "eval"},
               {"init", "ft"},
               {"data", json::array({{{"ref", "heldout.tsv"}}})},
               {"tau", kTau}}})}};
}

json unscored_arrangement_spec(int threads) {
    return {
        {"seed", 9000},
        {"replicas", 4},
        {"batch_size", kBatch},
        {"threads", threads},
        {"stages",
         json::array(
             {{{"name", "soft_pre"},  // same stage name as the scored arm -> same per-stage seeds
               {"action", "train"},
               {"data", json::array({{{"ref", "pool.tsv"}}})},
               {"steps", kPretrainSteps},
               {"lr", lr_json(pretrain_lr())}},
              {{"name", "ev_pre"},
               {"action", "eval"},
               {"init", "soft_pre"},
               {"data", json::array({{{"ref", "heldout.tsv"}}})},
               {"tau", kTau}},
              {{"name", "ft"},
               {"action", "finetune"},
               {"init", "soft_pre"},
               {"data", json::array({{{"ref", "trusted.tsv"}}})},
               {"steps", kFinetuneSteps},
               {"lr", lr_json(finetune_lr())}},
              {{"name", "ev_post"},
               {"action", "eval"},
               {"init", "ft"},
               {"data", json::array({{{"ref", "heldout.tsv"}}})},
               {"tau", kTau}}})}};
}

RunManifest run_spec(const json& spec_json, const fs::path& data_dir, const fs::path& out_dir) {
    const auto spec = ExperimentSpec::from_json(spec_json, data_dir.string());
    return run_experiment(spec, out_dir.string());
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

Outcome criterion1() {
    const auto fixture = dppl_of_deltas({-2.0, -1.0, 0.0, 1.0});
    const std::vector<double> want = {1.0, 0.75, 0.5, 0.25};
    if (fixture != want) return {false, "rank fixture mismatch"};

    // Any odd-N dataset with distinct scores: the best example ranks 1.0 and
    // the median example ranks ~0.5.
    Rng rng(17);
    std::vector<double> deltas(101);
    for (std::size_t i = 0; i < deltas.size(); ++i)
        deltas[i] = static_cast<double>(i) - 50.0;  // distinct
    for (std::size_t i = 0; i + 1 < deltas.size(); ++i)
        std::swap(deltas[i], deltas[i + rng.uniform_index(deltas.size() - i)]);
    const auto ranks = dppl_of_deltas(deltas);
    const double best = *std::max_element(ranks.begin(), ranks.end());
    double median_rank = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i)
        if (deltas[i] == 0.0) median_rank = ranks[i];  // 0 is the median of -50..50
    if (best != 1.0) return {false, "best rank " + fmt(best) + " != 1.0"};
    if (std::abs(median_rank - 0.5) > 1.0 / 101.0)
        return {false, "median rank " + fmt(median_rank) + " not ~0.5"};
    return {true, "fixture [1.0, 0.75, 0.5, 0.25]; odd-N best=1.0, median=" + fmt(median_rank)};
}

Outcome criterion2() {
    const double ppl_minus = 2.69, ppl_plus = 2.44;
    const double delta = ppl_plus - ppl_minus;
    if (delta != -0.25) return {false, "2.44 - 2.69 = " + fmt(delta) + " != -0.25"};
    return {true, "ppl- 2.69, ppl+ 2.44 -> delta -0.25 exactly"};
}

Outcome criterion3() {
    const auto pair = make_theta_pair(3001, 1);
    const auto target = gen_origin("trusted", 1000, derive_seed(3001, 104));  // disjoint draw
    const auto scored = score_dataset(target, pair.minus, pair.plus);
    std::size_t neg = 0;
    for (const auto& s : scored) neg += s.delta_ppl < 0.0;
    const double frac = static_cast<double>(neg) / static_cast<double>(scored.size());
    if (frac < 0.90) return {false, "only " + fmt(frac) + " of trusted examples have delta < 0"};
    return {true, fmt(frac) + " of a disjoint trusted set scores delta < 0 (>= 0.90)"};
}

Outcome criterion4() {
    ModelConfig cfg;
    double worst = 0.0;
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const auto params = TransducerParams::init(cfg, seed);
        const auto examples = gen_origin("crowd-like", 5, derive_seed(seed, 5));
        for (std::size_t i = 0; i < examples.size(); ++i) {
            const double err =
                grad_check(params, cfg, examples[i], 1e-5, 400, derive_seed(seed, i));
            worst = std::max(worst, err);
        }
    }
    if (worst >= 1e-4) return {false, "max relative gradient error " + fmt(worst)};
    return {true, "max relative gradient error " + fmt(worst) + " < 1e-4 (5 examples x 3 seeds)"};
}

Outcome criterion5() {
    ModelConfig cfg;
    const auto params = TransducerParams::init(cfg, 31);
    const auto examples = gen_origin("crowd-like", 4, 32);

    // (a) zero-weight examples are exactly neutral
    Gradients with_zero = TransducerParams::zeros(cfg), without = TransducerParams::zeros(cfg);
    loss_and_grad(params, cfg, {{examples[0], 1.0}, {examples[1], 0.0}}, with_zero);
    loss_and_grad(params, cfg, {{examples[0], 1.0}}, without);
    if (!(with_zero == without)) return {false, "zero-weight example perturbed the gradients"};

    // (b) weighted-batch gradients equal the weighted average of per-example
    // gradients to relative 1e-10
    const double w1 = 0.3, w2 = 0.85;
    Gradients batch = TransducerParams::zeros(cfg);
    loss_and_grad(params, cfg, {{examples[2], w1}, {examples[3], w2}}, batch);
    Gradients g1 = TransducerParams::zeros(cfg), g2 = TransducerParams::zeros(cfg);
    loss_and_grad(params, cfg, {{examples[2], 1.0}}, g1);
    loss_and_grad(params, cfg, {{examples[3], 1.0}}, g2);
    Gradients avg = TransducerParams::zeros(cfg);
    avg.axpy(w1 / (w1 + w2), g1);
    avg.axpy(w2 / (w1 + w2), g2);
    auto tensors_a = batch.tensors(cfg);
    auto tensors_b = avg.tensors(cfg);
    double worst = 0.0;
    for (std::size_t t = 0; t < tensors_a.size(); ++t)
        for (std::size_t i = 0; i < tensors_a[t].data->size(); ++i) {
            const double a = (*tensors_a[t].data)[i], b = (*tensors_b[t].data)[i];
            const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
            worst = std::max(worst, std::abs(a - b) / denom);
        }
    if (worst >= 1e-10) return {false, "weighted-average mismatch, rel err " + fmt(worst)};

    // (c) hard sign cutoff retains exactly {delta < 0}; the surviving fraction
    // is reported, not asserted
    const Checkpoint a{TransducerParams::init(cfg, 33), cfg, 0, ""};
    const Checkpoint b{TransducerParams::init(cfg, 34), cfg, 0, ""};
    auto scored = score_dataset(gen_origin("crowd-like", 500, 35), a, b);
    dppl_ranks(scored);
    const auto weighted = apply_strategy(scored, 0, StrategyConfig::hard_sign());
    std::size_t retained = 0;
    for (std::size_t i = 0; i < weighted.size(); ++i) {
        const bool kept = *weighted[i].example.weight > 0.0;
        if (kept != (scored[i].delta_ppl < 0.0))
            return {false, "hard sign cutoff disagrees with {delta < 0}"};
        retained += kept;
    }
    const double frac = static_cast<double>(retained) / static_cast<double>(weighted.size());
    return {true, "zero-weight neutral; weighted-average rel err " + fmt(worst) +
                      "; hard cutoff == {delta<0}, measured retention " + fmt(frac)};
}

Outcome criterion6() {
    const double H = 640.0;
    if (schedule_k(0.0, H) != 1.0 || schedule_k(H, H) != 0.5 || schedule_k(2.0 * H, H) != 0.25)
        return {false, "curriculum curve k(t) off at 0/H/2H"};

    // 200 distinct ranked examples, dppl = 1 - i/200
    std::vector<ScoredExample> scored(200);
    for (std::size_t i = 0; i < scored.size(); ++i) {
        scored[i].example.id = i;
        scored[i].example.source = "ab";
        scored[i].example.target = "ab";
        scored[i].delta_ppl = static_cast<double>(i) - 100.0;
        scored[i].dppl = 1.0 - static_cast<double>(i) / 200.0;
    }
    auto retained_ids = [&](const StrategyConfig& cfg, std::uint64_t t) {
        std::vector<std::uint64_t> ids;
        for (const auto& s : apply_strategy(scored, t, cfg))
            if (*s.example.weight > 0.0) ids.push_back(s.example.id);
        return ids;
    };
    auto is_subset = [](const std::vector<std::uint64_t>& small,
                        const std::vector<std::uint64_t>& big) {
        return std::includes(big.begin(), big.end(), small.begin(), small.end());
    };

    // fraction mode anneals down to the floor: nested shrinking sets
    const auto frac_cfg = StrategyConfig::hard_cclm(H);
    std::vector<std::uint64_t> prev;
    for (std::uint64_t t : {0ull, 640ull, 1280ull, 3200ull, 64000ull}) {
        const auto ids = retained_ids(frac_cfg, t);
        if (!prev.empty() && !is_subset(ids, prev))
            return {false, "fraction-mode retained sets are not nested"};
        prev = ids;
    }
    if (prev.size() != 10)  // ceil(0.05 * 200)
        return {false, "fraction mode floor retains " + std::to_string(prev.size()) + " != 10"};

    // literal mode grows in the opposite direction
    const auto lit_cfg = StrategyConfig::hard_cclm(H, 0.05, DirectionMode::Literal);
    prev.clear();
    for (std::uint64_t t : {0ull, 640ull, 1280ull, 3200ull, 64000ull}) {
        const auto ids = retained_ids(lit_cfg, t);
        if (!prev.empty() && !is_subset(prev, ids))
            return {false, "literal-mode retained sets are not nested upward"};
        prev = ids;
    }
    return {true, "k(0/H/2H) = 1/0.5/0.25; fraction sets nest down to the 5% floor; "
                  "literal sets nest upward"};
}

double mixed_auc(std::uint64_t seed, int threads, const fs::path* save_dir) {
    const auto pair = make_theta_pair(seed, threads);
    MixtureSpec spec;
    spec.origins.push_back(mixed_origin(20000));
    const auto corpus = make_dataset(spec, derive_seed(seed, 105));
    auto scored = score_dataset(corpus, pair.minus, pair.plus, false, threads);
    dppl_ranks(scored);
    if (save_dir) {
        save_checkpoint((*save_dir / "theta_minus.ckpt").string(), pair.minus);
        save_checkpoint((*save_dir / "theta_plus.ckpt").string(), pair.plus);
        write_dataset((*save_dir / "mixed_scored.tsv").string(), scored_to_rows(scored));
    }
    return dppl_auc(scored, {QualityClass::CleanCorrection}, {QualityClass::InfoChange});
}

Outcome criterion7() {
    double sum = 0.0;
    std::string parts;
    for (std::uint64_t seed : {1000u, 1001u, 1002u, 1003u}) {
        const double auc = mixed_auc(seed, 1, nullptr);
        sum += auc;
        parts += (parts.empty() ? "" : ", ") + fmt(auc);
    }
    const double mean = sum / 4.0;
    if (mean < 0.75)
        return {false, "mean clean-vs-infochange AUC " + fmt(mean) + " < 0.75 [" + parts + "]"};
    return {true, "mean clean-vs-infochange AUC " + fmt(mean) + " >= 0.75 over 4 seeds [" + parts +
                      "]"};
}

Outcome criterion8() {
    const auto data_dir = fresh_dir("c8_data");
    write_experiment_inputs(data_dir);
    const auto scored_m =
        run_spec(scored_arrangement_spec(1), data_dir, fresh_dir("c8_scored"));
    const auto plain_m =
        run_spec(unscored_arrangement_spec(1), data_dir, fresh_dir("c8_unscored"));
    const double s_pre = *scored_m.mean_metric("ev_pre", "f_beta");
    const double s_post = *scored_m.mean_metric("ev_post", "f_beta");
    const double u_pre = *plain_m.mean_metric("ev_pre", "f_beta");
    const double u_post = *plain_m.mean_metric("ev_post", "f_beta");
    const std::string nums = "pretrain F " + fmt(s_pre) + " vs " + fmt(u_pre) +
                             "; post-finetune F " + fmt(s_post) + " vs " + fmt(u_post);
    if (!(s_post > u_post)) return {false, "scored arm does not beat unscored after finetune; " + nums};
    if (!((s_pre - u_pre) > (s_post - u_post)))
        return {false, "pretrain-stage gap does not exceed the post-finetune gap; " + nums};
    return {true, nums + " (gap shrinks " + fmt(s_pre - u_pre) + " -> " + fmt(s_post - u_post) +
                      ")"};
}

Outcome criterion9() {
    // Part 1: stratified halving preserves proportions (+-1) with strict nesting.
    MixtureSpec spec;
    spec.origins.push_back(origin_preset("trusted", 4000, kCorruptRate));
    spec.origins.push_back(origin_preset("crowd-like", 2400, kCorruptRate));
    std::vector<DatasetRow> rows;
    for (auto& ex : make_dataset(spec, 9100)) rows.push_back({std::move(ex), {}, {}, {}, {}});
    const auto halves = nested_halves(rows, 6, {GroupKey::Origin, GroupKey::Quality}, 9101);
    if (halves.stopped_early || halves.levels.size() != 7)
        return {false, "halving stopped early: " + halves.warning};
    auto strata_counts = [](const std::vector<DatasetRow>& level) {
        std::map<std::string, std::size_t> counts;
        for (const auto& r : level)
            counts[r.example.origin + "|" +
                   std::string(r.example.quality ? to_string(*r.example.quality) : "")]++;
        return counts;
    };
    for (std::size_t l = 1; l < halves.levels.size(); ++l) {
        const auto prev = strata_counts(halves.levels[l - 1]);
        const auto cur = strata_counts(halves.levels[l]);
        for (const auto& [key, n_prev] : prev) {
            const auto it = cur.find(key);
            const std::size_t n_cur = it == cur.end() ? 0 : it->second;
            const double expected = static_cast<double>(n_prev) / 2.0;
            if (std::abs(static_cast<double>(n_cur) - expected) > 1.0)
                return {false, "stratum '" + key + "' off by more than 1 at level " +
                                   std::to_string(l)};
        }
        std::vector<std::uint64_t> prev_ids, cur_ids;
        for (const auto& r : halves.levels[l - 1]) prev_ids.push_back(r.example.id);
        for (const auto& r : halves.levels[l]) cur_ids.push_back(r.example.id);
        std::sort(prev_ids.begin(), prev_ids.end());
        std::sort(cur_ids.begin(), cur_ids.end());
        if (!std::includes(prev_ids.begin(), prev_ids.end(), cur_ids.begin(), cur_ids.end()))
            return {false, "level " + std::to_string(l) + " is not a subset of its parent"};
    }

    // Part 2: finetune-set size sweep over the 7 nested levels. The held-out
    // F0.5 of (shared pretrain -> finetune on level) should trend upward with
    // size, allowing at most one inversion.
    ModelConfig cfg;
    const auto pool = gen_origin("crowd-like", 4000, 9102);
    const auto heldout = gen_origin("trusted", 500, 9103);
    const auto pre = train_fresh(cfg, pool, 9104, 9105, kPretrainSteps, pretrain_lr(), 1, "pre");

    std::vector<DatasetRow> ft_rows;
    for (auto& ex : gen_origin("trusted", 6400, 9106)) ft_rows.push_back({std::move(ex), {}, {}, {}, {}});
    const auto ft_halves = nested_halves(ft_rows, 6, {GroupKey::Quality}, 9107);
    if (ft_halves.stopped_early) return {false, "finetune halving stopped early"};

    const auto out_dir = fresh_dir("c9_trend");
    std::ofstream table(out_dir / "trend.tsv", std::ios::binary);
    table << "#fields:\tsize\tf_beta\n";
    std::vector<double> curve;  // smallest size first
    std::string nums;
    for (std::size_t l = ft_halves.levels.size(); l-- > 0;) {
        std::vector<Example> data;
        for (const auto& r : ft_halves.levels[l]) data.push_back(r.example);
        const auto ft = finetune_from(pre, data, derive_seed(9108, l), 1, "ft");
        const double f = eval_checkpoint(ft, heldout).f_beta;
        curve.push_back(f);
        table << data.size() << '\t' << f << '\n';
        nums += (nums.empty() ? "" : ", ") + std::to_string(data.size()) + ":" + fmt(f);
    }
    int inversions = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) inversions += curve[i] < curve[i - 1];
    if (inversions > 1)
        return {false, std::to_string(inversions) + " inversions in the size curve [" + nums + "]"};
    return {true, "6 nested halves stratified +-1; size curve has " + std::to_string(inversions) +
                      " inversion(s) [" + nums + "]"};
}

std::map<std::string, std::uint64_t> artifact_digests(const fs::path& root) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), root).string();
        if (rel == "manifest.json") continue;  // embeds the requested thread count
        out[rel] = file_digest(entry.path().string());
    }
    return out;
}

Outcome criterion10() {
    // Re-run the discrimination scorer (criterion 7, first seed) and the
    // scored experiment arm (criterion 8) at two thread counts; checkpoints,
    // scored files and metric tables must be bit-identical.
    const auto d1 = fresh_dir("c10_score_t1");
    const auto d3 = fresh_dir("c10_score_t3");
    const double auc1 = mixed_auc(1000, 1, &d1);
    const double auc3 = mixed_auc(1000, 3, &d3);
    if (auc1 != auc3) return {false, "AUC differs across thread counts"};
    if (artifact_digests(d1) != artifact_digests(d3))
        return {false, "scorer checkpoints or scored file differ across thread counts"};

    const auto data_dir = fresh_dir("c10_data");
    write_experiment_inputs(data_dir);
    const auto run1 = fresh_dir("c10_run_t1");
    const auto run3 = fresh_dir("c10_run_t3");
    run_spec(scored_arrangement_spec(1), data_dir, run1);
    run_spec(scored_arrangement_spec(3), data_dir, run3);
    const auto dig1 = artifact_digests(run1);
    const auto dig3 = artifact_digests(run3);
    if (dig1 != dig3) {
        for (const auto& [rel, d] : dig1) {
            const auto it = dig3.find(rel);
            if (it == dig3.end() || it->second != d)
                return {false, "experiment artifact differs across thread counts: " + rel};
        }
        return {false, "experiment artifact sets differ across thread counts"};
    }
    return {true, std::to_string(dig1.size()) +
                      " experiment artifacts and the scorer outputs are bit-identical at "
                      "threads 1 and 3"};
}

using CriterionFn = Outcome (*)();
constexpr CriterionFn kCriteria[] = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                     criterion6, criterion7, criterion8, criterion9, criterion10};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--criterion N]\n";
            return 2;
        }
    }
    if (only < 0 || only > 10) {
        std::cerr << "error: criterion must be in 1..10\n";
        return 2;
    }
    bool all_pass = true;
    for (int c = 1; c <= 10; ++c) {
        if (only != 0 && c != only) continue;
        Outcome outcome;
        try {
            outcome = kCriteria[c - 1]();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::cout << "criterion " << c << ": " << (outcome.pass ? "pass" : "FAIL") << " - "
                  << outcome.detail << std::endl;
        all_pass = all_pass && outcome.pass;
    }
    return all_pass ? 0 : 1;
}
