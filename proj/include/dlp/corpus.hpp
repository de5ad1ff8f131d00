#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dlp/rng.hpp"

namespace dlp {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class QualityClass {
    CleanCorrection,
    Identity,
    PartialCorrection,
    InfoChange,
    BadEdit,
};

std::string_view to_string(QualityClass q);
QualityClass quality_from_string(std::string_view s);

struct Example {
    std::uint64_t id = 0;
    std::string source;
    std::string target;
    std::string origin;
    std::optional<QualityClass> quality;
    std::optional<double> weight;  // absent until a strategy materializes weights

    bool operator==(const Example&) const = default;
};

// Generation alphabet: lowercase letters plus space.
std::string_view corpus_alphabet();

enum class CorruptOp { Insert, Delete, Transpose, Replace };

struct CorruptionConfig {
    double rate_per_char = 0.003;
    // Probability weights in order {insert, delete, transpose, replace}.
    std::array<double, 4> op_mix = {0.25, 0.25, 0.25, 0.25};
    bool length_preserving = false;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument on violation

    static CorruptionConfig uniform(double rate);                    // all four ops
    static CorruptionConfig uniform_length_preserving(double rate);  // transpose + replace
};

struct CorruptStats {
    std::size_t positions = 0;  // Bernoulli trials drawn
    std::size_t hits = 0;       // operations applied
};

struct OriginSpec {
    std::string name;
    std::size_t count = 0;
    std::map<QualityClass, double> proportions;  // must sum to 1
    CorruptionConfig corruption;
};

struct MixtureSpec {
    std::vector<OriginSpec> origins;
    std::uint64_t lexicon_seed = 1;
    bool benchmark_mode = true;  // requires length-preserving corruption everywhere

    void validate() const;
};

// Named presets emulating characteristic noise profiles:
// "rev-like" (info-change heavy), "rt-like" (transposition/rephrase heavy),
// "crowd-like" (mixed partial/bad-edit), "trusted" (90% clean, 10% identity).
OriginSpec origin_preset(std::string_view name, std::size_t count, double rate = 0.08);

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

// 50 words of length 3..7 over a-z, derived from lexicon_seed.
std::vector<std::string> make_lexicon(std::uint64_t lexicon_seed);

// n sentences of 3..8 lexicon words joined by single spaces.
std::vector<std::string> gen_clean(std::size_t n, std::uint64_t lexicon_seed, std::uint64_t rng_seed);

// One corruption pass: per original position, with probability rate_per_char
// apply an operation sampled from op_mix. Applied left to right; a transpose
// consumes the following position.
std::string corrupt(std::string_view sentence, const CorruptionConfig& cfg, Rng& rng,
                    CorruptStats* stats = nullptr);

std::vector<Example> make_dataset(const MixtureSpec& spec, std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Dataset files (tab-separated, one record per line, '#fields:' header)
// ---------------------------------------------------------------------------

struct DatasetRow {
    Example example;
    std::optional<double> ppl_minus;
    std::optional<double> ppl_plus;
    std::optional<double> delta_ppl;
    std::optional<double> dppl;

    bool operator==(const DatasetRow&) const = default;
};

struct DatasetColumns {
    bool weight = false;
    bool scores = false;  // ppl_minus, ppl_plus, delta_ppl
    bool dppl = false;

    static DatasetColumns infer(const std::vector<DatasetRow>& rows);
};

class DatasetWriter {
public:
    DatasetWriter(const std::string& path, DatasetColumns columns);
    void write(const DatasetRow& row);
    void write(const Example& ex) { write(DatasetRow{ex, {}, {}, {}, {}}); }
    void close();

private:
    std::ofstream out_;
    std::string path_;
    DatasetColumns columns_;
};

class DatasetReader {
public:
    explicit DatasetReader(const std::string& path);
    // nullopt at end of file; throws on malformed input (message carries the
    // line number and offending field).
    std::optional<DatasetRow> next();
    const DatasetColumns& columns() const { return columns_; }

private:
    std::ifstream in_;
    std::string path_;
    DatasetColumns columns_;
    std::vector<std::string> field_names_;
    std::unordered_set<std::uint64_t> seen_ids_;
    std::size_t line_no_ = 0;
};

std::vector<DatasetRow> read_dataset(const std::string& path);
void write_dataset(const std::string& path, const std::vector<DatasetRow>& rows);
void write_dataset(const std::string& path, const std::vector<Example>& examples);

std::uint64_t file_digest(const std::string& path);

// Largest-remainder apportionment of `total` across `weights` (non-negative,
// positive sum). Returned counts sum to total exactly.
std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights);

}  // namespace dlp
