#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlp/corpus.hpp"
#include "dlp/model.hpp"

namespace dlp {

struct ScoredExample {
    Example example;
    double ppl_minus = 0.0;  // -log p under theta_minus
    double ppl_plus = 0.0;   // -log p under theta_plus
    double delta_ppl = 0.0;  // ppl_plus - ppl_minus
    std::optional<double> dppl;

    DatasetRow to_row() const;
    static ScoredExample from_row(const DatasetRow& row);  // requires score columns
};

struct ScoreProvenance {
    std::string theta_minus;
    std::string theta_plus;
    std::uint64_t base_digest = 0;
};

struct ScoredDataset {
    std::vector<ScoredExample> examples;
    ScoreProvenance provenance;
};

struct DeltaPpl {
    double ppl_minus;
    double ppl_plus;
    double delta_ppl;
};

// Eq-style per-example score between two checkpoints of the same architecture.
// normalize_by_length divides both negative log-probabilities by |target|.
DeltaPpl delta_ppl(const Checkpoint& theta_minus, const Checkpoint& theta_plus, const Example& ex,
                   bool normalize_by_length = false);

// Scores every example, preserving input order. Pure in the checkpoints;
// parallel over examples with order restored.
std::vector<ScoredExample> score_dataset(const std::vector<Example>& base,
                                         const Checkpoint& theta_minus,
                                         const Checkpoint& theta_plus,
                                         bool normalize_by_length = false, int threads = 1);

// Fills dppl = 1 - percentile_rank/100 where percentile_rank(x) =
// 100 * |{y : delta_ppl_y < delta_ppl_x}| / N (ties share a rank). The
// minimum-delta example gets dppl = 1. Throws on an empty dataset.
void dppl_ranks(std::vector<ScoredExample>& scored);

// Rank values alone, for already-extracted delta scores (same convention).
std::vector<double> dppl_of_deltas(const std::vector<double>& deltas);

std::vector<DatasetRow> scored_to_rows(const std::vector<ScoredExample>& scored);
std::vector<ScoredExample> rows_to_scored(const std::vector<DatasetRow>& rows);

// Sidecar manifest (<path>.manifest.json) naming the two checkpoints and the
// base dataset digest.
void write_score_manifest(const std::string& scored_path, const ScoreProvenance& provenance);

}  // namespace dlp
