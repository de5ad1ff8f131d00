#include "dlp/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dlp/scoring.hpp"
#include "dlp/text.hpp"
#include "dlp/trainer.hpp"

namespace fs = std::filesystem;

namespace dlp {

std::string_view to_string(StageAction a) {
    switch (a) {
        case StageAction::Train: return "train";
        case StageAction::Finetune: return "finetune";
        case StageAction::Continue: return "continue";
        case StageAction::Score: return "score";
        case StageAction::ApplyStrategy: return "apply_strategy";
        case StageAction::Eval: return "eval";
    }
    throw std::logic_error("unreachable stage action");
}

StageAction stage_action_from_string(std::string_view s) {
    for (StageAction a : {StageAction::Train, StageAction::Finetune, StageAction::Continue,
                          StageAction::Score, StageAction::ApplyStrategy, StageAction::Eval})
        if (to_string(a) == s) return a;
    throw std::runtime_error("unknown stage action: '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json lr_to_json(const LrSchedule& s) {
    if (s.kind == LrSchedule::Kind::WarmupInvSqrt)
        return {{"kind", "warmup_invsqrt"}, {"lr0", s.lr0}, {"warmup_steps", s.warmup_steps}};
    return {{"kind", "constant"}, {"lr", s.lr}};
}

LrSchedule lr_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "warmup_invsqrt")
        return LrSchedule::warmup_invsqrt(j.at("lr0").get<double>(),
                                          j.at("warmup_steps").get<std::uint64_t>());
    if (kind == "constant") return LrSchedule::constant(j.at("lr").get<double>());
    throw std::runtime_error("unknown lr schedule kind: '" + kind + "'");
}

json strategy_to_json(const StrategyConfig& s) {
    json j = {{"kind", to_string(s.kind)}};
    if (s.kind == StrategyKind::Hard) {
        j["sign_cutoff"] = s.sign_cutoff;
        if (!s.sign_cutoff) j["dppl_cutoff"] = s.dppl_cutoff;
    }
    if (s.kind == StrategyKind::HardCclm || s.kind == StrategyKind::SoftCclm) {
        j["half_life"] = s.half_life;
        j["floor"] = s.floor;
        j["direction"] = to_string(s.direction);
    }
    if (s.kind != StrategyKind::Unscored) j["batch_mode"] = to_string(s.batch_mode);
    return j;
}

StrategyConfig strategy_from_json(const json& j) {
    StrategyConfig s;
    s.kind = strategy_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("sign_cutoff")) s.sign_cutoff = j.at("sign_cutoff").get<bool>();
    if (j.contains("dppl_cutoff")) {
        s.dppl_cutoff = j.at("dppl_cutoff").get<double>();
        s.sign_cutoff = j.contains("sign_cutoff") ? s.sign_cutoff : false;
    }
    if (j.contains("half_life")) s.half_life = j.at("half_life").get<double>();
    if (j.contains("floor")) s.floor = j.at("floor").get<double>();
    if (j.contains("direction"))
        s.direction = direction_mode_from_string(j.at("direction").get<std::string>());
    if (j.contains("batch_mode"))
        s.batch_mode = batch_mode_from_string(j.at("batch_mode").get<std::string>());
    s.validate();
    return s;
}

json model_to_json(const ModelConfig& m) {
    return {{"vocab", m.vocab},         {"embed_dim", m.embed_dim}, {"hidden_dim", m.hidden_dim},
            {"window", m.window},       {"init_scale", m.init_scale}};
}

ModelConfig model_from_json(const json& j) {
    ModelConfig m;
    if (j.contains("vocab")) m.vocab = j.at("vocab").get<std::string>();
    if (j.contains("embed_dim")) m.embed_dim = j.at("embed_dim").get<int>();
    if (j.contains("hidden_dim")) m.hidden_dim = j.at("hidden_dim").get<int>();
    if (j.contains("window")) m.window = j.at("window").get<int>();
    if (j.contains("init_scale")) m.init_scale = j.at("init_scale").get<double>();
    m.validate();
    return m;
}

bool is_train_like(StageAction a) {
    return a == StageAction::Train || a == StageAction::Finetune || a == StageAction::Continue;
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j, const std::string& base_dir) {
    ExperimentSpec spec;
    spec.base_dir = base_dir;
    spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("replicas")) spec.replicas = j.at("replicas").get<int>();
    if (j.contains("model")) spec.model = model_from_json(j.at("model"));
    if (j.contains("batch_size")) spec.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("threads")) spec.threads = j.at("threads").get<int>();
    for (const auto& sj : j.at("stages")) {
        StageSpec st;
        st.name = sj.at("name").get<std::string>();
        st.action = stage_action_from_string(sj.at("action").get<std::string>());
        if (sj.contains("data"))
            for (const auto& dj : sj.at("data")) {
                DataRef ref;
                ref.ref = dj.at("ref").get<std::string>();
                if (dj.contains("weight")) ref.weight = dj.at("weight").get<double>();
                st.data.push_back(ref);
            }
        if (sj.contains("init")) st.init = sj.at("init").get<std::string>();
        if (sj.contains("steps")) st.steps = sj.at("steps").get<std::uint64_t>();
        if (sj.contains("batch_size")) st.batch_size = sj.at("batch_size").get<std::size_t>();
        if (sj.contains("lr")) st.lr = lr_from_json(sj.at("lr"));
        if (sj.contains("strategy")) st.strategy = strategy_from_json(sj.at("strategy"));
        if (sj.contains("score_args")) {
            const auto& sc = sj.at("score_args");
            st.score_base = sc.at("base").get<std::string>();
            st.score_theta_minus = sc.at("theta_minus").get<std::string>();
            st.score_theta_plus = sc.at("theta_plus").get<std::string>();
            if (sc.contains("out")) st.score_out = sc.at("out").get<std::string>();
            if (sc.contains("normalize_by_length"))
                st.normalize_by_length = sc.at("normalize_by_length").get<bool>();
        }
        if (sj.contains("t")) st.at_step = sj.at("t").get<std::uint64_t>();
        if (sj.contains("out")) st.out = sj.at("out").get<std::string>();
        if (sj.contains("tau")) st.tau = sj.at("tau").get<double>();
        spec.stages.push_back(std::move(st));
    }
    spec.validate();
    return spec;
}

ExperimentSpec ExperimentSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open experiment spec '" + path + "'");
    json j;
    in >> j;
    return from_json(j, fs::path(path).parent_path().string());
}

nlohmann::json ExperimentSpec::to_json() const {
    json stages_json = json::array();
    for (const auto& st : stages) {
        json sj = {{"name", st.name}, {"action", std::string(to_string(st.action))}};
        if (!st.data.empty()) {
            json data = json::array();
            for (const auto& d : st.data) data.push_back({{"ref", d.ref}, {"weight", d.weight}});
            sj["data"] = data;
        }
        if (!st.init.empty()) sj["init"] = st.init;
        if (st.steps) sj["steps"] = st.steps;
        if (st.batch_size) sj["batch_size"] = *st.batch_size;
        if (st.lr) sj["lr"] = lr_to_json(*st.lr);
        sj["strategy"] = strategy_to_json(st.strategy);
        if (st.action == StageAction::Score)
            sj["score_args"] = {{"base", st.score_base},
                                {"theta_minus", st.score_theta_minus},
                                {"theta_plus", st.score_theta_plus},
                                {"out", st.score_out},
                                {"normalize_by_length", st.normalize_by_length}};
        if (st.action == StageAction::ApplyStrategy) {
            sj["t"] = st.at_step;
            sj["out"] = st.out;
        }
        if (st.action == StageAction::Eval) sj["tau"] = st.tau;
        stages_json.push_back(std::move(sj));
    }
    return {{"seed", seed},           {"replicas", replicas},       {"model", model_to_json(model)},
            {"batch_size", batch_size}, {"threads", threads},       {"stages", stages_json}};
}

std::uint64_t ExperimentSpec::digest() const {
    const std::string s = to_json().dump();
    return fnv1a(s.data(), s.size());
}

void ExperimentSpec::validate() const {
    if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    model.validate();
    std::set<std::string> seen;
    std::set<std::string> train_stages;
    std::set<std::string> derived_outputs;  // score / apply_strategy stage names
    for (const auto& st : stages) {
        if (st.name.empty()) throw std::invalid_argument("stage name must be non-empty");
        if (!seen.insert(st.name).second)
            throw std::invalid_argument("duplicate stage name '" + st.name + "'");
        auto require_prior_checkpoint = [&](const std::string& ref, const char* what) {
            if (!train_stages.count(ref))
                throw std::invalid_argument("stage '" + st.name + "': " + what + " '" + ref +
                                            "' must name a preceding train-like stage");
        };
        for (const auto& d : st.data) {
            if (d.weight <= 0.0)
                throw std::invalid_argument("stage '" + st.name + "': mix weights must be positive");
            for (const char* prefix : {"scored:", "weighted:"}) {
                if (d.ref.starts_with(prefix)) {
                    const std::string dep = d.ref.substr(std::string_view(prefix).size());
                    if (!derived_outputs.count(dep))
                        throw std::invalid_argument("stage '" + st.name + "': data ref '" + d.ref +
                                                    "' must name a preceding score/apply stage");
                }
            }
        }
        if (is_train_like(st.action)) {
            if (st.data.empty())
                throw std::invalid_argument("stage '" + st.name + "': training requires data");
            if (!st.lr)
                throw std::invalid_argument("stage '" + st.name + "': training requires an lr schedule");
            if (st.steps == 0)
                throw std::invalid_argument("stage '" + st.name + "': training requires steps > 0");
            if (st.action == StageAction::Train) {
                if (!st.init.empty() && st.init != "fresh") require_prior_checkpoint(st.init, "init");
            } else {
                if (st.init.empty() || st.init == "fresh")
                    throw std::invalid_argument("stage '" + st.name +
                                                "': finetune/continue require a checkpoint init");
                require_prior_checkpoint(st.init, "init");
            }
            train_stages.insert(st.name);
        } else if (st.action == StageAction::Score) {
            if (st.score_base.empty())
                throw std::invalid_argument("stage '" + st.name + "': score requires a base dataset");
            require_prior_checkpoint(st.score_theta_minus, "theta_minus");
            require_prior_checkpoint(st.score_theta_plus, "theta_plus");
            derived_outputs.insert(st.name);
        } else if (st.action == StageAction::ApplyStrategy) {
            if (st.data.size() != 1)
                throw std::invalid_argument("stage '" + st.name +
                                            "': apply_strategy takes exactly one data ref");
            derived_outputs.insert(st.name);
        } else if (st.action == StageAction::Eval) {
            if (st.data.empty())
                throw std::invalid_argument("stage '" + st.name + "': eval requires data");
            require_prior_checkpoint(st.init, "init");
        }
    }
}

// ---------------------------------------------------------------------------
// Manifest helpers
// ---------------------------------------------------------------------------

std::optional<double> RunManifest::metric(int replica, const std::string& stage,
                                          const std::string& metric_name) const {
    for (const auto& m : metrics)
        if (m.replica == replica && m.stage == stage && m.metric == metric_name) return m.value;
    return std::nullopt;
}

std::optional<double> RunManifest::mean_metric(const std::string& stage,
                                               const std::string& metric_name) const {
    return metric(-1, stage, metric_name);
}

// ---------------------------------------------------------------------------
// Seed derivation shared with the CLI verbs (so scripted runs reproduce
// pipeline runs bit-exactly).
// ---------------------------------------------------------------------------

std::uint64_t stage_init_seed(std::uint64_t replica_seed, std::string_view stage) {
    return derive_seed(replica_seed, fnv1a(stage.data(), stage.size()) ^ 0x1d17ULL);
}

std::uint64_t stage_sampling_seed(std::uint64_t replica_seed, std::string_view stage) {
    return derive_seed(replica_seed, fnv1a(stage.data(), stage.size()) ^ 0x5a3eULL);
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

namespace {

struct ReplicaState {
    std::map<std::string, Checkpoint> checkpoints;
    std::map<std::string, std::vector<DatasetRow>> stage_rows;
};

struct FileCache {
    std::map<std::string, std::vector<DatasetRow>> rows;

    const std::vector<DatasetRow>& get(const std::string& path) {
        auto it = rows.find(path);
        if (it == rows.end()) it = rows.emplace(path, read_dataset(path)).first;
        return it->second;
    }
};

std::string resolve_path(const std::string& base_dir, const std::string& ref) {
    fs::path p(ref);
    if (p.is_absolute() || base_dir.empty()) return ref;
    return (fs::path(base_dir) / p).string();
}

const std::vector<DatasetRow>& resolve_rows(const ExperimentSpec& spec, const std::string& ref,
                                            ReplicaState& state, FileCache& cache) {
    for (const char* prefix : {"scored:", "weighted:"}) {
        if (ref.starts_with(prefix)) {
            const std::string dep = ref.substr(std::string_view(prefix).size());
            const auto it = state.stage_rows.find(dep);
            if (it == state.stage_rows.end())
                throw std::runtime_error("data ref '" + ref + "': stage output not available");
            return it->second;
        }
    }
    return cache.get(resolve_path(spec.base_dir, ref));
}

void add_metric(std::vector<MetricRow>& metrics, json& stage_json, int replica,
                const std::string& stage, const std::string& name, double value) {
    metrics.push_back({replica, stage, name, value});
    stage_json["metrics"][name] = value;
}

}  // namespace

RunManifest run_experiment(const ExperimentSpec& spec, const std::string& out_dir) {
    spec.validate();
    fs::create_directories(out_dir);
    RunManifest manifest;
    manifest.spec_digest = spec.digest();
    json replicas_json = json::array();
    FileCache cache;

    for (int r = 0; r < spec.replicas; ++r) {
        const std::uint64_t replica_seed = spec.seed + static_cast<std::uint64_t>(r);
        const std::string rel_dir = "replica_" + std::to_string(r);
        const fs::path rdir = fs::path(out_dir) / rel_dir;
        fs::create_directories(rdir);
        ReplicaState state;
        json stages_json = json::array();

        for (const auto& st : spec.stages) {
            json sj = {{"name", st.name}, {"action", std::string(to_string(st.action))}};
            switch (st.action) {
                case StageAction::Train:
                case StageAction::Finetune:
                case StageAction::Continue: {
                    TrainMixture mixture;
                    json digests = json::array();
                    for (const auto& d : st.data) {
                        const auto& rows = resolve_rows(spec, d.ref, state, cache);
                        mixture.parts.push_back(make_train_dataset(rows, spec.model));
                        mixture.weights.push_back(d.weight);
                        digests.push_back({{"ref", d.ref}});
                    }
                    sj["data"] = digests;
                    Checkpoint ckpt;
                    ckpt.config = spec.model;
                    std::uint64_t start_step = 0;
                    if (st.init.empty() || st.init == "fresh") {
                        ckpt.params =
                            TransducerParams::init(spec.model, stage_init_seed(replica_seed, st.name));
                    } else {
                        const Checkpoint& base = state.checkpoints.at(st.init);
                        ckpt.params = base.params;
                        start_step = base.step;
                    }
                    TrainOptions opts;
                    opts.steps = st.steps;
                    opts.batch_size = st.batch_size.value_or(spec.batch_size);
                    opts.lr = *st.lr;
                    // Continue resumes the pretraining lr clock; fresh stages start it.
                    opts.lr_step_offset = (st.action == StageAction::Continue) ? start_step : 0;
                    opts.strategy = st.strategy;
                    opts.sampling_seed = stage_sampling_seed(replica_seed, st.name);
                    opts.threads = spec.threads;
                    const TrainResult result = train(ckpt.params, spec.model, mixture, opts);
                    ckpt.step = start_step + st.steps;
                    ckpt.stage_name = st.name;
                    const std::string rel = rel_dir + "/" + st.name + ".ckpt";
                    save_checkpoint((fs::path(out_dir) / rel).string(), ckpt);
                    state.checkpoints[st.name] = std::move(ckpt);
                    sj["checkpoint"] = rel;
                    sj["checkpoint_digest"] = file_digest((fs::path(out_dir) / rel).string());
                    add_metric(manifest.metrics, sj, r, st.name, "final_loss", result.final_loss);
                    add_metric(manifest.metrics, sj, r, st.name, "mean_recent_loss",
                               result.mean_recent_loss);
                    break;
                }
                case StageAction::Score: {
                    const auto& base_rows = resolve_rows(spec, st.score_base, state, cache);
                    std::vector<Example> base;
                    base.reserve(base_rows.size());
                    for (const auto& row : base_rows) base.push_back(row.example);
                    const Checkpoint& tm = state.checkpoints.at(st.score_theta_minus);
                    const Checkpoint& tp = state.checkpoints.at(st.score_theta_plus);
                    auto scored =
                        score_dataset(base, tm, tp, st.normalize_by_length, spec.threads);
                    dppl_ranks(scored);
                    std::size_t negatives = 0;
                    for (const auto& s : scored) negatives += s.delta_ppl < 0.0;
                    const std::string file_name =
                        st.score_out.empty() ? st.name + "_scored.tsv" : st.score_out;
                    const std::string rel = rel_dir + "/" + file_name;
                    auto rows = scored_to_rows(scored);
                    write_dataset((fs::path(out_dir) / rel).string(), rows);
                    ScoreProvenance prov;
                    prov.theta_minus = rel_dir + "/" + st.score_theta_minus + ".ckpt";
                    prov.theta_plus = rel_dir + "/" + st.score_theta_plus + ".ckpt";
                    prov.base_digest = fnv1a(st.score_base.data(), st.score_base.size());
                    write_score_manifest((fs::path(out_dir) / rel).string(), prov);
                    state.stage_rows[st.name] = std::move(rows);
                    sj["scored_file"] = rel;
                    sj["scored_digest"] = file_digest((fs::path(out_dir) / rel).string());
                    add_metric(manifest.metrics, sj, r, st.name, "frac_delta_negative",
                               scored.empty() ? 0.0
                                              : static_cast<double>(negatives) /
                                                    static_cast<double>(scored.size()));
                    add_metric(manifest.metrics, sj, r, st.name, "n",
                               static_cast<double>(scored.size()));
                    break;
                }
                case StageAction::ApplyStrategy: {
                    const auto& rows = resolve_rows(spec, st.data[0].ref, state, cache);
                    const auto weighted = apply_strategy(rows_to_scored(rows), st.at_step, st.strategy);
                    double weight_sum = 0.0;
                    std::size_t retained = 0;
                    for (const auto& s : weighted) {
                        weight_sum += *s.example.weight;
                        retained += *s.example.weight > 0.0;
                    }
                    const std::string file_name = st.out.empty() ? st.name + ".tsv" : st.out;
                    const std::string rel = rel_dir + "/" + file_name;
                    auto out_rows = scored_to_rows(weighted);
                    write_dataset((fs::path(out_dir) / rel).string(), out_rows);
                    state.stage_rows[st.name] = std::move(out_rows);
                    sj["weighted_file"] = rel;
                    const double n = weighted.empty() ? 1.0 : static_cast<double>(weighted.size());
                    add_metric(manifest.metrics, sj, r, st.name, "mean_weight", weight_sum / n);
                    add_metric(manifest.metrics, sj, r, st.name, "retained_fraction",
                               static_cast<double>(retained) / n);
                    break;
                }
                case StageAction::Eval: {
                    const Checkpoint& ckpt = state.checkpoints.at(st.init);
                    std::vector<std::string> sources, hyps, refs;
                    for (const auto& d : st.data) {
                        for (const auto& row : resolve_rows(spec, d.ref, state, cache)) {
                            sources.push_back(row.example.source);
                            refs.push_back(row.example.target);
                            hyps.push_back(decode(ckpt.params, spec.model, row.example.source, st.tau));
                        }
                    }
                    const EvalReport report = edit_f_beta(sources, hyps, refs, 0.5);
                    add_metric(manifest.metrics, sj, r, st.name, "precision", report.precision);
                    add_metric(manifest.metrics, sj, r, st.name, "recall", report.recall);
                    add_metric(manifest.metrics, sj, r, st.name, "f_beta", report.f_beta);
                    add_metric(manifest.metrics, sj, r, st.name, "exact_match", report.exact_match);
                    add_metric(manifest.metrics, sj, r, st.name, "n", static_cast<double>(report.n));
                    break;
                }
            }
            stages_json.push_back(std::move(sj));
        }
        replicas_json.push_back(
            {{"replica", r}, {"seed", replica_seed}, {"stages", std::move(stages_json)}});
    }

    // Cross-replica means.
    {
        std::vector<std::pair<std::string, std::string>> keys;
        for (const auto& m : manifest.metrics) {
            const auto key = std::make_pair(m.stage, m.metric);
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
        }
        json means;
        for (const auto& [stage, metric] : keys) {
            double sum = 0.0;
            int count = 0;
            for (const auto& m : manifest.metrics)
                if (m.replica >= 0 && m.stage == stage && m.metric == metric) {
                    sum += m.value;
                    ++count;
                }
            const double mean = sum / static_cast<double>(count);
            manifest.metrics.push_back({-1, stage, metric, mean});
            means[stage][metric] = mean;
        }
        manifest.json = {{"spec_digest", manifest.spec_digest},
                         {"spec", spec.to_json()},
                         {"replicas", std::move(replicas_json)},
                         {"mean_metrics", std::move(means)}};
    }

    {
        std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
        out << manifest.json.dump(2) << '\n';
    }
    {
        std::ofstream out(fs::path(out_dir) / "metrics.tsv", std::ios::binary);
        out << "#fields:\treplica\tstage\tmetric\tvalue\n";
        for (const auto& m : manifest.metrics) {
            if (m.replica < 0)
                out << "mean";
            else
                out << m.replica;
            out << '\t' << m.stage << '\t' << m.metric << '\t' << format_double(m.value) << '\n';
        }
    }
    return manifest;
}

// ---------------------------------------------------------------------------
// Nested halving
// ---------------------------------------------------------------------------

namespace {

std::string stratum_key(const DatasetRow& row, const std::vector<GroupKey>& strata) {
    std::string key;
    for (GroupKey k : strata) {
        if (!key.empty()) key.push_back('|');
        if (k == GroupKey::Origin)
            key += row.example.origin;
        else
            key += row.example.quality ? std::string(to_string(*row.example.quality)) : "unlabeled";
    }
    return key;
}

}  // namespace

NestedHalves nested_halves(const std::vector<DatasetRow>& dataset, std::size_t levels,
                           const std::vector<GroupKey>& strata, std::uint64_t seed) {
    if (dataset.empty()) throw std::invalid_argument("nested_halves: empty dataset");
    if (levels < 1) throw std::invalid_argument("nested_halves: levels must be >= 1");
    NestedHalves out;
    out.levels.push_back(dataset);
    for (std::size_t level = 1; level <= levels; ++level) {
        const auto& prev = out.levels.back();
        // stratum -> positions in prev, in order
        std::map<std::string, std::vector<std::size_t>> groups;
        std::vector<std::string> group_order;
        for (std::size_t i = 0; i < prev.size(); ++i) {
            const std::string key = stratum_key(prev[i], strata);
            auto [it, inserted] = groups.try_emplace(key);
            if (inserted) group_order.push_back(key);
            it->second.push_back(i);
        }
        const std::size_t next_total = (prev.size() + 1) / 2;
        std::vector<double> sizes;
        for (const auto& name : group_order)
            sizes.push_back(static_cast<double>(groups.at(name).size()));
        const auto counts = largest_remainder(next_total, sizes);
        bool exhausted = false;
        for (std::size_t g = 0; g < counts.size(); ++g)
            if (counts[g] == 0) exhausted = true;
        if (exhausted || next_total == 0) {
            out.stopped_early = true;
            out.warning = "stratum exhausted at level " + std::to_string(level) + "; produced " +
                          std::to_string(out.levels.size() - 1) + " of " + std::to_string(levels) +
                          " levels";
            break;
        }
        Rng rng(derive_seed(seed, level));
        std::vector<bool> selected(prev.size(), false);
        for (std::size_t g = 0; g < group_order.size(); ++g) {
            auto positions = groups.at(group_order[g]);
            // partial Fisher-Yates: pick counts[g] positions without replacement
            for (std::size_t i = 0; i < counts[g]; ++i)
                std::swap(positions[i], positions[i + rng.uniform_index(positions.size() - i)]);
            for (std::size_t i = 0; i < counts[g]; ++i) selected[positions[i]] = true;
        }
        std::vector<DatasetRow> next;
        next.reserve(next_total);
        for (std::size_t i = 0; i < prev.size(); ++i)
            if (selected[i]) next.push_back(prev[i]);
        out.levels.push_back(std::move(next));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

SweepResult sweep(const nlohmann::json& spec_template, const std::string& axis,
                  const std::vector<nlohmann::json>& values, const std::string& out_root,
                  const std::string& base_dir) {
    const json::json_pointer pointer(axis);
    {
        // axis must resolve in the template
        json probe = spec_template;
        probe[pointer];  // creates the slot if absent; parse errors throw
    }
    fs::create_directories(out_root);
    SweepResult result;
    for (std::size_t i = 0; i < values.size(); ++i) {
        SweepCell cell;
        cell.value = values[i];
        cell.out_dir = (fs::path(out_root) / ("cell_" + std::to_string(i))).string();
        try {
            json patched = spec_template;
            patched[pointer] = values[i];
            const ExperimentSpec spec = ExperimentSpec::from_json(patched, base_dir);
            cell.manifest = run_experiment(spec, cell.out_dir);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        result.cells.push_back(std::move(cell));
    }
    std::ofstream out(fs::path(out_root) / "summary.tsv", std::ios::binary);
    out << "#fields:\tcell\tvalue\tstage\tmetric\tmean\n";
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const auto& cell = result.cells[i];
        if (!cell.manifest) {
            out << i << '\t' << cell.value.dump() << "\terror\terror\t" << cell.error << '\n';
            continue;
        }
        for (const auto& m : cell.manifest->metrics)
            if (m.replica < 0)
                out << i << '\t' << cell.value.dump() << '\t' << m.stage << '\t' << m.metric << '\t'
                    << format_double(m.value) << '\n';
    }
    return result;
}

}  // namespace dlp
