#include "dlp/scoring.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "dlp/parallel.hpp"

namespace dlp {

DatasetRow ScoredExample::to_row() const {
    DatasetRow row;
    row.example = example;
    row.ppl_minus = ppl_minus;
    row.ppl_plus = ppl_plus;
    row.delta_ppl = delta_ppl;
    row.dppl = dppl;
    return row;
}

ScoredExample ScoredExample::from_row(const DatasetRow& row) {
    if (!row.ppl_minus || !row.ppl_plus || !row.delta_ppl)
        throw std::runtime_error("example " + std::to_string(row.example.id) +
                                 ": missing score columns");
    ScoredExample s;
    s.example = row.example;
    s.ppl_minus = *row.ppl_minus;
    s.ppl_plus = *row.ppl_plus;
    s.delta_ppl = *row.delta_ppl;
    s.dppl = row.dppl;
    return s;
}

DeltaPpl delta_ppl(const Checkpoint& theta_minus, const Checkpoint& theta_plus, const Example& ex,
                   bool normalize_by_length) {
    if (theta_minus.config.digest() != theta_plus.config.digest())
        throw std::runtime_error("checkpoint config mismatch between theta_minus and theta_plus");
    const ModelConfig& cfg = theta_minus.config;
    const EncodedExample enc = encode(cfg, ex);
    ModelWorkspace ws;
    double ppl_minus = -log_prob(theta_minus.params, cfg, enc, ws);
    double ppl_plus = -log_prob(theta_plus.params, cfg, enc, ws);
    if (normalize_by_length) {
        const double n = static_cast<double>(enc.target.size());
        ppl_minus /= n;
        ppl_plus /= n;
    }
    return {ppl_minus, ppl_plus, ppl_plus - ppl_minus};
}

std::vector<ScoredExample> score_dataset(const std::vector<Example>& base,
                                         const Checkpoint& theta_minus,
                                         const Checkpoint& theta_plus, bool normalize_by_length,
                                         int threads) {
    if (theta_minus.config.digest() != theta_plus.config.digest())
        throw std::runtime_error("checkpoint config mismatch between theta_minus and theta_plus");
    std::vector<ScoredExample> out(base.size());
    std::vector<std::string> errors(base.size());
    parallel_for(base.size(), threads, [&](std::size_t i) {
        try {
            const auto s = delta_ppl(theta_minus, theta_plus, base[i], normalize_by_length);
            out[i] = {base[i], s.ppl_minus, s.ppl_plus, s.delta_ppl, std::nullopt};
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < base.size(); ++i)
        if (!errors[i].empty())
            throw std::runtime_error("scoring example " + std::to_string(base[i].id) + ": " +
                                     errors[i]);
    return out;
}

std::vector<double> dppl_of_deltas(const std::vector<double>& deltas) {
    const std::size_t n = deltas.size();
    if (n == 0) throw std::invalid_argument("dppl_ranks: empty dataset");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return deltas[a] < deltas[b]; });
    std::vector<double> dppl(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && deltas[order[j]] == deltas[order[i]]) ++j;
        // strict-less count is i for the whole tie group
        const double value = 1.0 - static_cast<double>(i) / static_cast<double>(n);
        for (std::size_t k = i; k < j; ++k) dppl[order[k]] = value;
        i = j;
    }
    return dppl;
}

void dppl_ranks(std::vector<ScoredExample>& scored) {
    std::vector<double> deltas(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) deltas[i] = scored[i].delta_ppl;
    const auto ranks = dppl_of_deltas(deltas);
    for (std::size_t i = 0; i < scored.size(); ++i) scored[i].dppl = ranks[i];
}

std::vector<DatasetRow> scored_to_rows(const std::vector<ScoredExample>& scored) {
    std::vector<DatasetRow> rows;
    rows.reserve(scored.size());
    for (const auto& s : scored) rows.push_back(s.to_row());
    return rows;
}

std::vector<ScoredExample> rows_to_scored(const std::vector<DatasetRow>& rows) {
    std::vector<ScoredExample> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(ScoredExample::from_row(r));
    return out;
}

void write_score_manifest(const std::string& scored_path, const ScoreProvenance& provenance) {
    nlohmann::json j = {
        {"theta_minus", provenance.theta_minus},
        {"theta_plus", provenance.theta_plus},
        {"base_digest", provenance.base_digest},
    };
    const std::string path = scored_path + ".manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

}  // namespace dlp
