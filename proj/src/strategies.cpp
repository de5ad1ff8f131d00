#include "dlp/strategies.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dlp {

std::string_view to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::Unscored: return "unscored";
        case StrategyKind::Hard: return "hard";
        case StrategyKind::Soft: return "soft";
        case StrategyKind::HardCclm: return "hard_cclm";
        case StrategyKind::SoftCclm: return "soft_cclm";
    }
    throw std::logic_error("unreachable strategy kind");
}

std::string_view to_string(DirectionMode m) {
    return m == DirectionMode::Fraction ? "fraction" : "literal";
}

std::string_view to_string(BatchMode m) {
    return m == BatchMode::WeightedMask ? "weighted_mask" : "resample_to_fill";
}

StrategyKind strategy_kind_from_string(std::string_view s) {
    for (StrategyKind k : {StrategyKind::Unscored, StrategyKind::Hard, StrategyKind::Soft,
                           StrategyKind::HardCclm, StrategyKind::SoftCclm})
        if (to_string(k) == s) return k;
    throw std::runtime_error("unknown strategy kind: '" + std::string(s) + "'");
}

DirectionMode direction_mode_from_string(std::string_view s) {
    if (s == "fraction") return DirectionMode::Fraction;
    if (s == "literal") return DirectionMode::Literal;
    throw std::runtime_error("unknown direction mode: '" + std::string(s) + "'");
}

BatchMode batch_mode_from_string(std::string_view s) {
    if (s == "weighted_mask") return BatchMode::WeightedMask;
    if (s == "resample_to_fill") return BatchMode::ResampleToFill;
    throw std::runtime_error("unknown batch mode: '" + std::string(s) + "'");
}

void StrategyConfig::validate() const {
    if (kind == StrategyKind::Hard && !sign_cutoff && (dppl_cutoff < 0.0 || dppl_cutoff > 1.0))
        throw std::invalid_argument("dppl_cutoff must lie in [0,1]");
    if (kind == StrategyKind::HardCclm || kind == StrategyKind::SoftCclm) {
        if (half_life <= 0.0) throw std::invalid_argument("half_life must be positive");
        if (floor <= 0.0 || floor > 1.0) throw std::invalid_argument("floor must lie in (0,1]");
    }
}

StrategyConfig StrategyConfig::hard_sign() {
    StrategyConfig c;
    c.kind = StrategyKind::Hard;
    c.sign_cutoff = true;
    return c;
}

StrategyConfig StrategyConfig::hard_rank(double cutoff) {
    StrategyConfig c;
    c.kind = StrategyKind::Hard;
    c.sign_cutoff = false;
    c.dppl_cutoff = cutoff;
    return c;
}

StrategyConfig StrategyConfig::soft() {
    StrategyConfig c;
    c.kind = StrategyKind::Soft;
    return c;
}

StrategyConfig StrategyConfig::hard_cclm(double half_life, double floor, DirectionMode direction) {
    StrategyConfig c;
    c.kind = StrategyKind::HardCclm;
    c.half_life = half_life;
    c.floor = floor;
    c.direction = direction;
    return c;
}

StrategyConfig StrategyConfig::soft_cclm(double half_life, double floor, DirectionMode direction) {
    StrategyConfig c;
    c.kind = StrategyKind::SoftCclm;
    c.half_life = half_life;
    c.floor = floor;
    c.direction = direction;
    return c;
}

double schedule_k(double t, double half_life) {
    if (t < 0.0) throw std::invalid_argument("schedule_k: t must be >= 0");
    if (half_life <= 0.0) throw std::invalid_argument("schedule_k: half_life must be positive");
    return std::exp2(-t / half_life);
}

double retained_fraction(double t, const StrategyConfig& cfg) {
    return std::max(cfg.floor, schedule_k(t, cfg.half_life));
}

namespace {

// Fraction mode keeps the best r(t) of the ranked dataset. Strict comparison:
// with ranks 1 - i/N the retained count at fraction r is ceil(r*N), i.e.
// exactly the top r for divisible N.
bool in_retained_fraction(double dppl, double r) { return dppl > 1.0 - r; }

}  // namespace

double example_weight(double dppl, std::uint64_t t, const StrategyConfig& cfg,
                      std::optional<double> delta_ppl) {
    cfg.validate();
    if (cfg.kind == StrategyKind::Unscored) return 1.0;
    if (!(dppl > 0.0 && dppl <= 1.0)) throw std::invalid_argument("dppl must lie in (0,1]");
    const double td = static_cast<double>(t);
    switch (cfg.kind) {
        case StrategyKind::Hard:
            if (cfg.sign_cutoff) {
                if (!delta_ppl)
                    throw std::runtime_error("hard strategy with sign_cutoff requires delta_ppl");
                return *delta_ppl < 0.0 ? 1.0 : 0.0;
            }
            return dppl >= cfg.dppl_cutoff ? 1.0 : 0.0;
        case StrategyKind::Soft:
            return dppl;
        case StrategyKind::HardCclm:
            if (cfg.direction == DirectionMode::Fraction)
                return in_retained_fraction(dppl, retained_fraction(td, cfg)) ? 1.0 : 0.0;
            return dppl >= schedule_k(td, cfg.half_life) ? 1.0 : 0.0;
        case StrategyKind::SoftCclm:
            if (cfg.direction == DirectionMode::Fraction)
                return in_retained_fraction(dppl, retained_fraction(td, cfg)) ? 1.0 : dppl;
            return dppl >= schedule_k(td, cfg.half_life) ? 1.0 : dppl;
        case StrategyKind::Unscored:
            break;
    }
    return 1.0;
}

std::vector<ScoredExample> apply_strategy(const std::vector<ScoredExample>& scored, std::uint64_t t,
                                          const StrategyConfig& cfg) {
    cfg.validate();
    std::vector<ScoredExample> out = scored;
    bool any_positive = scored.empty();
    for (auto& s : out) {
        double w;
        if (cfg.kind == StrategyKind::Unscored) {
            w = 1.0;
        } else {
            if (!s.dppl)
                throw std::runtime_error("example " + std::to_string(s.example.id) +
                                         ": dppl required by strategy " +
                                         std::string(to_string(cfg.kind)));
            w = example_weight(*s.dppl, t, cfg, s.delta_ppl);
        }
        s.example.weight = w;
        any_positive = any_positive || w > 0.0;
    }
    if (!any_positive)
        throw std::runtime_error("strategy " + std::string(to_string(cfg.kind)) +
                                 " leaves no effective data at step " + std::to_string(t));
    return out;
}

}  // namespace dlp
