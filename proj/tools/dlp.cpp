// Command-line front end: deterministic, scriptable verbs over the library.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dlp/corpus.hpp"
#include "dlp/evalreport.hpp"
#include "dlp/model.hpp"
#include "dlp/pipeline.hpp"
#include "dlp/scoring.hpp"
#include "dlp/strategies.hpp"
#include "dlp/text.hpp"
#include "dlp/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "dlp 1.0.0";

struct StrategyFlags {
    std::string kind = "unscored";
    bool sign_cutoff = true;
    std::optional<double> dppl_cutoff;
    double half_life = 0.0;
    double floor = 0.05;
    std::string direction = "fraction";
    std::string batch_mode = "weighted_mask";

    void attach(CLI::App* cmd) {
        cmd->add_option("--strategy", kind,
                        "unscored|hard|soft|hard_cclm|soft_cclm (default unscored)");
        cmd->add_option("--dppl-cutoff", dppl_cutoff,
                        "hard strategy: retain dppl >= cutoff instead of delta_ppl < 0");
        cmd->add_option("--half-life", half_life, "curriculum half-life H in steps");
        cmd->add_option("--floor", floor, "curriculum retained-fraction floor (default 0.05)");
        cmd->add_option("--direction", direction, "fraction|literal (default fraction)");
        cmd->add_option("--batch-mode", batch_mode,
                        "weighted_mask|resample_to_fill (default weighted_mask)");
    }

    dlp::StrategyConfig build() const {
        dlp::StrategyConfig cfg;
        cfg.kind = dlp::strategy_kind_from_string(kind);
        if (dppl_cutoff) {
            cfg.sign_cutoff = false;
            cfg.dppl_cutoff = *dppl_cutoff;
        }
        cfg.half_life = half_life;
        cfg.floor = floor;
        cfg.direction = dlp::direction_mode_from_string(direction);
        cfg.batch_mode = dlp::batch_mode_from_string(batch_mode);
        cfg.validate();
        return cfg;
    }
};

struct LrFlags {
    std::string kind = "constant";
    double lr = 0.0;
    double lr0 = 0.0;
    std::uint64_t warmup = 1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--lr-kind", kind, "constant|warmup_invsqrt (default constant)");
        cmd->add_option("--lr", lr, "constant learning rate");
        cmd->add_option("--lr0", lr0, "peak learning rate for warmup_invsqrt");
        cmd->add_option("--warmup", warmup, "warmup steps for warmup_invsqrt");
    }

    dlp::LrSchedule build() const {
        if (kind == "constant") {
            if (lr <= 0.0) throw CLI::ValidationError("--lr must be positive");
            return dlp::LrSchedule::constant(lr);
        }
        if (kind == "warmup_invsqrt") {
            if (lr0 <= 0.0) throw CLI::ValidationError("--lr0 must be positive");
            return dlp::LrSchedule::warmup_invsqrt(lr0, warmup);
        }
        throw CLI::ValidationError("unknown --lr-kind '" + kind + "'");
    }
};

// "path" or "path:weight"
dlp::DataRef parse_data_ref(const std::string& s) {
    const auto pos = s.rfind(':');
    if (pos != std::string::npos && pos + 1 < s.size()) {
        try {
            return {s.substr(0, pos), dlp::parse_double(s.substr(pos + 1))};
        } catch (const std::exception&) {
            // fall through: the suffix was not a number, treat whole string as a path
        }
    }
    return {s, 1.0};
}

int run_cli(int argc, char** argv) {
    CLI::App app{"delta-perplexity scoring and score-aware training toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    int threads = 1;
    app.add_option("--threads", threads, "worker thread bound (outputs are thread-count invariant)")
        ->envname("DLP_THREADS");

    // --- gen ----------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a synthetic labeled dataset");
    std::vector<std::string> gen_origins;
    std::uint64_t gen_seed = 0;
    std::uint64_t gen_lexicon_seed = 1;
    double gen_rate = 0.08;
    std::string gen_out;
    gen->add_option("--origin", gen_origins,
                    "preset:count, repeatable (rev-like|rt-like|crowd-like|trusted)")
        ->required();
    gen->add_option("--seed", gen_seed, "generation seed")->required();
    gen->add_option("--lexicon-seed", gen_lexicon_seed, "lexicon seed (default 1)");
    gen->add_option("--rate", gen_rate, "corruption rate per character (default 0.08)");
    gen->add_option("--out", gen_out, "output dataset file")->required()->envname("DLP_OUT_DIR");
    gen->callback([&] {
        dlp::MixtureSpec spec;
        spec.lexicon_seed = gen_lexicon_seed;
        for (const auto& o : gen_origins) {
            const auto pos = o.rfind(':');
            if (pos == std::string::npos)
                throw std::runtime_error("--origin expects preset:count, got '" + o + "'");
            spec.origins.push_back(dlp::origin_preset(o.substr(0, pos),
                                                      dlp::parse_u64(o.substr(pos + 1)), gen_rate));
        }
        spec.validate();
        dlp::write_dataset(gen_out, dlp::make_dataset(spec, gen_seed));
    });

    // --- corrupt ------------------------------------------------------------
    auto* corrupt = app.add_subcommand("corrupt", "corrupt sentences (stdin/file -> stdout/file)");
    std::uint64_t cor_seed = 0;
    double cor_rate = 0.08;
    bool cor_lp = false;
    std::string cor_in, cor_out;
    corrupt->add_option("--seed", cor_seed, "corruption seed")->required();
    corrupt->add_option("--rate", cor_rate, "corruption rate per character");
    corrupt->add_flag("--length-preserving", cor_lp, "restrict to transpose and replace");
    corrupt->add_option("--in", cor_in, "input file (default stdin)");
    corrupt->add_option("--out", cor_out, "output file (default stdout)");
    corrupt->callback([&] {
        auto cfg = cor_lp ? dlp::CorruptionConfig::uniform_length_preserving(cor_rate)
                          : dlp::CorruptionConfig::uniform(cor_rate);
        dlp::Rng rng(cor_seed);
        std::ifstream fin;
        std::ofstream fout;
        if (!cor_in.empty()) fin.open(cor_in);
        if (!cor_in.empty() && !fin) throw std::runtime_error("cannot open '" + cor_in + "'");
        if (!cor_out.empty()) fout.open(cor_out, std::ios::binary);
        std::istream& in = cor_in.empty() ? std::cin : fin;
        std::ostream& out = cor_out.empty() ? std::cout : fout;
        std::string line;
        while (std::getline(in, line)) out << dlp::corrupt(line, cfg, rng) << '\n';
    });

    // --- train / finetune / continue ------------------------------------------
    struct TrainFlags {
        std::vector<std::string> data;
        std::string init;
        std::string out;
        std::string name;
        std::uint64_t seed = 0;
        std::uint64_t steps = 0;
        std::size_t batch_size = 32;
        LrFlags lr;
        StrategyFlags strategy;
    };
    auto add_train_verb = [&](const char* verb, const char* help, bool requires_init) {
        auto* cmd = app.add_subcommand(verb, help);
        auto flags = std::make_shared<TrainFlags>();
        flags->name = verb;
        cmd->add_option("--data", flags->data, "dataset file or file:mixweight, repeatable")
            ->required();
        auto* init_opt = cmd->add_option("--init", flags->init, "initial checkpoint");
        if (requires_init) init_opt->required();
        cmd->add_option("--out", flags->out, "output checkpoint")->required();
        cmd->add_option("--name", flags->name, "stage name used in seed derivation");
        cmd->add_option("--seed", flags->seed, "replica seed")->required();
        cmd->add_option("--steps", flags->steps, "SGD steps")->required();
        cmd->add_option("--batch-size", flags->batch_size, "batch size (default 32)");
        flags->lr.attach(cmd);
        flags->strategy.attach(cmd);
        const bool is_continue = std::string(verb) == "continue";
        cmd->callback([&, flags, requires_init, is_continue] {
            dlp::Checkpoint ckpt;
            std::uint64_t start_step = 0;
            if (requires_init || !flags->init.empty()) {
                ckpt = dlp::load_checkpoint(flags->init);
                start_step = ckpt.step;
            } else {
                ckpt.config = dlp::ModelConfig{};
                ckpt.params = dlp::TransducerParams::init(
                    ckpt.config, dlp::stage_init_seed(flags->seed, flags->name));
            }
            dlp::TrainMixture mixture;
            for (const auto& d : flags->data) {
                const auto ref = parse_data_ref(d);
                mixture.parts.push_back(
                    dlp::make_train_dataset(dlp::read_dataset(ref.ref), ckpt.config));
                mixture.weights.push_back(ref.weight);
            }
            dlp::TrainOptions opts;
            opts.steps = flags->steps;
            opts.batch_size = flags->batch_size;
            opts.lr = flags->lr.build();
            opts.lr_step_offset = is_continue ? start_step : 0;
            opts.strategy = flags->strategy.build();
            opts.sampling_seed = dlp::stage_sampling_seed(flags->seed, flags->name);
            opts.threads = threads;
            dlp::train(ckpt.params, ckpt.config, mixture, opts);
            ckpt.step = start_step + flags->steps;
            ckpt.stage_name = flags->name;
            dlp::save_checkpoint(flags->out, ckpt);
        });
    };
    add_train_verb("train", "train a model from scratch (or from --init)", false);
    add_train_verb("finetune", "finetune from a checkpoint with a fresh lr clock", true);
    add_train_verb("continue", "resume training, continuing the lr schedule clock", true);

    // --- score --------------------------------------------------------------
    auto* score = app.add_subcommand("score", "delta log-perplexity between two checkpoints");
    std::string sc_data, sc_tm, sc_tp, sc_out;
    bool sc_norm = false;
    score->add_option("--data", sc_data, "base dataset file")->required();
    score->add_option("--theta-minus", sc_tm, "base checkpoint")->required();
    score->add_option("--theta-plus", sc_tp, "trusted-finetuned checkpoint")->required();
    score->add_option("--out", sc_out, "scored dataset file")->required();
    score->add_flag("--normalize-by-length", sc_norm, "divide log-probabilities by |target|");
    score->callback([&] {
        const auto rows = dlp::read_dataset(sc_data);
        std::vector<dlp::Example> base;
        base.reserve(rows.size());
        for (const auto& r : rows) base.push_back(r.example);
        const auto tm = dlp::load_checkpoint(sc_tm);
        const auto tp = dlp::load_checkpoint(sc_tp);
        const auto scored = dlp::score_dataset(base, tm, tp, sc_norm, threads);
        dlp::write_dataset(sc_out, dlp::scored_to_rows(scored));
        dlp::ScoreProvenance prov{sc_tm, sc_tp, dlp::file_digest(sc_data)};
        dlp::write_score_manifest(sc_out, prov);
    });

    // --- rank ---------------------------------------------------------------
    auto* rank = app.add_subcommand("rank", "add the dppl percentile-rank column");
    std::string rk_in, rk_out;
    rank->add_option("--in", rk_in, "scored dataset file")->required();
    rank->add_option("--out", rk_out, "ranked dataset file")->required();
    rank->callback([&] {
        auto scored = dlp::rows_to_scored(dlp::read_dataset(rk_in));
        dlp::dppl_ranks(scored);
        dlp::write_dataset(rk_out, dlp::scored_to_rows(scored));
    });

    // --- apply-strategy -------------------------------------------------------
    auto* applyv = app.add_subcommand("apply-strategy", "materialize strategy weights at a step");
    std::string ap_in, ap_out;
    std::uint64_t ap_t = 0;
    StrategyFlags ap_strategy;
    applyv->add_option("--in", ap_in, "ranked dataset file")->required();
    applyv->add_option("--out", ap_out, "weighted dataset file")->required();
    applyv->add_option("--t", ap_t, "curriculum step at which to evaluate weights");
    ap_strategy.attach(applyv);
    applyv->callback([&] {
        const auto scored = dlp::rows_to_scored(dlp::read_dataset(ap_in));
        const auto weighted = dlp::apply_strategy(scored, ap_t, ap_strategy.build());
        dlp::write_dataset(ap_out, dlp::scored_to_rows(weighted));
    });

    // --- run ----------------------------------------------------------------
    auto* runv = app.add_subcommand("run", "execute a multi-stage experiment spec");
    std::string run_spec, run_out;
    runv->add_option("--spec", run_spec, "experiment spec (JSON)")->required();
    runv->add_option("--out", run_out, "output directory")->required()->envname("DLP_OUT_DIR");
    runv->callback([&] {
        auto spec = dlp::ExperimentSpec::load(run_spec);
        if (threads > 1) spec.threads = threads;
        dlp::run_experiment(spec, run_out);
    });

    // --- sweep --------------------------------------------------------------
    auto* sweepv = app.add_subcommand("sweep", "run one experiment per value of a spec axis");
    std::string sw_spec, sw_axis, sw_out;
    std::vector<std::string> sw_values;
    sweepv->add_option("--spec", sw_spec, "experiment spec template (JSON)")->required();
    sweepv->add_option("--axis", sw_axis, "JSON pointer into the spec, e.g. /stages/0/steps")
        ->required();
    sweepv->add_option("--value", sw_values, "JSON value, repeatable")->required();
    sweepv->add_option("--out", sw_out, "output directory")->required()->envname("DLP_OUT_DIR");
    sweepv->callback([&] {
        std::ifstream in(sw_spec);
        if (!in) throw std::runtime_error("cannot open experiment spec '" + sw_spec + "'");
        json tmpl;
        in >> tmpl;
        std::vector<json> values;
        for (const auto& v : sw_values) values.push_back(json::parse(v));
        dlp::sweep(tmpl, sw_axis, values, sw_out, fs::path(sw_spec).parent_path().string());
    });

    // --- eval ---------------------------------------------------------------
    auto* evalv = app.add_subcommand("eval", "edit-level F0.5 of a checkpoint on a dataset");
    std::string ev_ckpt, ev_data, ev_out;
    double ev_tau = 0.0;
    evalv->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
    evalv->add_option("--data", ev_data, "evaluation dataset")->required();
    evalv->add_option("--tau", ev_tau, "identity margin for decoding (default 0)");
    evalv->add_option("--out", ev_out, "optional JSON report file");
    evalv->callback([&] {
        const auto ckpt = dlp::load_checkpoint(ev_ckpt);
        std::vector<std::string> sources, hyps, refs;
        for (const auto& row : dlp::read_dataset(ev_data)) {
            sources.push_back(row.example.source);
            refs.push_back(row.example.target);
            hyps.push_back(dlp::decode(ckpt.params, ckpt.config, row.example.source, ev_tau));
        }
        const auto report = dlp::edit_f_beta(sources, hyps, refs, 0.5);
        const json j = {{"precision", report.precision}, {"recall", report.recall},
                        {"f_beta", report.f_beta},       {"exact_match", report.exact_match},
                        {"n", report.n},                 {"skipped", report.skipped}};
        if (!ev_out.empty()) {
            std::ofstream out(ev_out, std::ios::binary);
            out << j.dump(2) << '\n';
        }
        std::cout << j.dump() << '\n';
    });

    // --- report -------------------------------------------------------------
    auto* reportv = app.add_subcommand("report", "plot-ready score-distribution tables");
    std::string rp_in, rp_out, rp_group = "quality";
    std::size_t rp_bins = 10;
    reportv->add_option("--in", rp_in, "ranked dataset file")->required();
    reportv->add_option("--out", rp_out, "output directory")->required()->envname("DLP_OUT_DIR");
    reportv->add_option("--group", rp_group, "origin|quality (default quality)");
    reportv->add_option("--bins", rp_bins, "histogram bins (default 10)");
    reportv->callback([&] {
        const auto scored = dlp::rows_to_scored(dlp::read_dataset(rp_in));
        const auto key = rp_group == "origin" ? dlp::GroupKey::Origin : dlp::GroupKey::Quality;
        if (rp_group != "origin" && rp_group != "quality")
            throw std::runtime_error("--group expects origin or quality, got '" + rp_group + "'");
        dlp::write_report_tables(rp_out, scored, key, rp_bins);
    });

    // --- ckpt ---------------------------------------------------------------
    auto* ckptv = app.add_subcommand("ckpt", "checkpoint utilities");
    ckptv->require_subcommand(1);
    auto* inspect = ckptv->add_subcommand("inspect", "print checkpoint metadata as JSON");
    std::string ci_in;
    inspect->add_option("--in", ci_in, "checkpoint")->required();
    inspect->callback([&] {
        const auto ckpt = dlp::load_checkpoint(ci_in);
        const json j = {{"step", ckpt.step},
                        {"stage", ckpt.stage_name},
                        {"config_digest", ckpt.config_hash()},
                        {"parameters", ckpt.params.size()},
                        {"embed_dim", ckpt.config.embed_dim},
                        {"hidden_dim", ckpt.config.hidden_dim},
                        {"window", ckpt.config.window},
                        {"vocab", ckpt.config.vocab}};
        std::cout << j.dump() << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // usage errors exit 2 by CLI11 convention below
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        const int rc = run_cli(argc, argv);
        // CLI11 uses 0 for help/success and its own codes for parse errors;
        // map every parse failure to 2 per the verb grammar contract.
        if (rc != 0) return 2;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
