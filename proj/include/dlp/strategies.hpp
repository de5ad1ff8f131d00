#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dlp/scoring.hpp"

namespace dlp {

enum class StrategyKind { Unscored, Hard, Soft, HardCclm, SoftCclm };
enum class DirectionMode { Fraction, Literal };
enum class BatchMode { WeightedMask, ResampleToFill };

std::string_view to_string(StrategyKind k);
std::string_view to_string(DirectionMode m);
std::string_view to_string(BatchMode m);
StrategyKind strategy_kind_from_string(std::string_view s);
DirectionMode direction_mode_from_string(std::string_view s);
BatchMode batch_mode_from_string(std::string_view s);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::Unscored;

    // hard: keep delta_ppl < 0 (sign_cutoff, the default) or keep dppl >= dppl_cutoff.
    bool sign_cutoff = true;
    double dppl_cutoff = 0.0;

    // curriculum kinds
    double half_life = 0.0;                              // H, steps
    double floor = 0.05;                                 // r_min
    DirectionMode direction = DirectionMode::Fraction;

    BatchMode batch_mode = BatchMode::WeightedMask;

    void validate() const;

    static StrategyConfig unscored() { return {}; }
    static StrategyConfig hard_sign();
    static StrategyConfig hard_rank(double cutoff);
    static StrategyConfig soft();
    static StrategyConfig hard_cclm(double half_life, double floor = 0.05,
                                    DirectionMode direction = DirectionMode::Fraction);
    static StrategyConfig soft_cclm(double half_life, double floor = 0.05,
                                    DirectionMode direction = DirectionMode::Fraction);
};

// Curriculum curve k(t) = 0.5^(t/H).
double schedule_k(double t, double half_life);

// Retained fraction r(t) = max(r_min, k(t)) in fraction mode.
double retained_fraction(double t, const StrategyConfig& cfg);

// Per-example weight in [0,1] as a function of rank score and step.
// delta_ppl must be supplied for the hard sign-cutoff rule.
double example_weight(double dppl, std::uint64_t t, const StrategyConfig& cfg,
                      std::optional<double> delta_ppl = std::nullopt);

// Immutable snapshot with weights materialized at step t. Throws when every
// weight is zero, naming the strategy and the step.
std::vector<ScoredExample> apply_strategy(const std::vector<ScoredExample>& scored, std::uint64_t t,
                                          const StrategyConfig& cfg);

}  // namespace dlp
