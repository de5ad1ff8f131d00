#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dlp/corpus.hpp"
#include "dlp/scoring.hpp"

namespace dlp {

// Position-level character edits between two equal-length sequences.
struct Edit {
    std::size_t position;
    char original;
    char replacement;

    auto operator<=>(const Edit&) const = default;
};

std::vector<Edit> edit_set(std::string_view from, std::string_view to);  // throws on length mismatch

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f_beta = 0.0;
    double exact_match = 0.0;
    std::size_t n = 0;        // items evaluated
    std::size_t skipped = 0;  // items excluded for length mismatch
};

// Corpus-level edit precision/recall/F_beta. Hypothesis edits are matched to
// reference edits by position and replacement. Items whose three sequences do
// not share a length are excluded and counted in `skipped`. When the system
// proposes no edits, precision is 0 if any reference edits exist corpus-wide
// and 1 otherwise.
EvalReport edit_f_beta(const std::vector<std::string>& sources,
                       const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references, double beta = 0.5);

// ROC area of dppl as a separator of the positive from the negative quality
// classes; ties count half.
double dppl_auc(const std::vector<ScoredExample>& scored,
                const std::vector<QualityClass>& positive_classes,
                const std::vector<QualityClass>& negative_classes);

enum class GroupKey { Origin, Quality };

struct RankHistogram {
    std::vector<std::string> groups;
    std::vector<std::size_t> bin_counts;                 // [bin]
    std::vector<std::vector<std::size_t>> group_counts;  // [bin][group]
    std::vector<std::vector<double>> proportions;        // [bin][group]; rows of a
                                                         // non-empty bin sum to 1
};

RankHistogram rank_histogram(const std::vector<ScoredExample>& scored, GroupKey key,
                             std::size_t bins);

// Writes the three plot-ready tables (rank-proportion histogram, delta_ppl
// histogram, (ppl_minus, delta_ppl) scatter) into `out_dir`.
void write_report_tables(const std::string& out_dir, const std::vector<ScoredExample>& scored,
                         GroupKey key, std::size_t bins);

}  // namespace dlp
