#include "dlp/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dlp/text.hpp"

namespace dlp {

namespace {

constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz ";

const std::array<QualityClass, 5> kAllClasses = {
    QualityClass::CleanCorrection, QualityClass::Identity,  QualityClass::PartialCorrection,
    QualityClass::InfoChange,      QualityClass::BadEdit,
};

int alphabet_index(char c) {
    if (c >= 'a' && c <= 'z') return c - 'a';
    if (c == ' ') return 26;
    return -1;
}

char random_alphabet_char(Rng& rng) {
    return kAlphabet[rng.uniform_index(kAlphabet.size())];
}

// Uniform over the alphabet minus `except`.
char random_other_char(Rng& rng, char except) {
    const int skip = alphabet_index(except);
    if (skip < 0) return random_alphabet_char(rng);
    auto r = rng.uniform_index(kAlphabet.size() - 1);
    if (r >= static_cast<std::uint64_t>(skip)) ++r;
    return kAlphabet[r];
}

CorruptOp sample_op(Rng& rng, const std::array<double, 4>& mix) {
    const double u = rng.uniform_real();
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        acc += mix[i];
        if (u < acc) return static_cast<CorruptOp>(i);
    }
    return CorruptOp::Replace;
}

}  // namespace

std::string_view corpus_alphabet() { return kAlphabet; }

std::string_view to_string(QualityClass q) {
    switch (q) {
        case QualityClass::CleanCorrection: return "clean_correction";
        case QualityClass::Identity: return "identity";
        case QualityClass::PartialCorrection: return "partial_correction";
        case QualityClass::InfoChange: return "info_change";
        case QualityClass::BadEdit: return "bad_edit";
    }
    throw std::logic_error("unreachable quality class");
}

QualityClass quality_from_string(std::string_view s) {
    for (QualityClass q : kAllClasses)
        if (to_string(q) == s) return q;
    throw std::runtime_error("unknown quality class: '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Corruption
// ---------------------------------------------------------------------------

void CorruptionConfig::validate() const {
    if (!(rate_per_char >= 0.0 && rate_per_char < 1.0))
        throw std::invalid_argument("rate_per_char must lie in [0,1)");
    double sum = 0.0;
    for (double w : op_mix) {
        if (w < 0.0) throw std::invalid_argument("op_mix weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("op_mix weights must sum to 1");
    if (length_preserving) {
        if (op_mix[static_cast<int>(CorruptOp::Insert)] != 0.0 ||
            op_mix[static_cast<int>(CorruptOp::Delete)] != 0.0)
            throw std::invalid_argument("length_preserving requires zero insert/delete weight");
    }
}

CorruptionConfig CorruptionConfig::uniform(double rate) {
    CorruptionConfig cfg;
    cfg.rate_per_char = rate;
    cfg.op_mix = {0.25, 0.25, 0.25, 0.25};
    cfg.length_preserving = false;
    return cfg;
}

CorruptionConfig CorruptionConfig::uniform_length_preserving(double rate) {
    CorruptionConfig cfg;
    cfg.rate_per_char = rate;
    cfg.op_mix = {0.0, 0.0, 0.5, 0.5};
    cfg.length_preserving = true;
    return cfg;
}

std::string corrupt(std::string_view sentence, const CorruptionConfig& cfg, Rng& rng,
                    CorruptStats* stats) {
    if (sentence.empty()) throw std::invalid_argument("corrupt: sentence must be non-empty");
    cfg.validate();
    std::string out;
    out.reserve(sentence.size() + 4);
    std::size_t i = 0;
    while (i < sentence.size()) {
        if (stats) ++stats->positions;
        if (!rng.bernoulli(cfg.rate_per_char)) {
            out.push_back(sentence[i]);
            ++i;
            continue;
        }
        if (stats) ++stats->hits;
        switch (sample_op(rng, cfg.op_mix)) {
            case CorruptOp::Replace:
                out.push_back(random_other_char(rng, sentence[i]));
                ++i;
                break;
            case CorruptOp::Transpose:
                if (i + 1 < sentence.size()) {
                    out.push_back(sentence[i + 1]);
                    out.push_back(sentence[i]);
                    i += 2;  // the swapped-in neighbor is consumed
                } else {
                    out.push_back(sentence[i]);  // no right neighbor; degenerate swap
                    ++i;
                }
                break;
            case CorruptOp::Insert:
                out.push_back(sentence[i]);
                out.push_back(random_alphabet_char(rng));
                ++i;
                break;
            case CorruptOp::Delete:
                ++i;
                break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

std::vector<std::string> make_lexicon(std::uint64_t lexicon_seed) {
    Rng rng(derive_seed(lexicon_seed, /*stream=*/0xe1c0));
    std::vector<std::string> words;
    words.reserve(50);
    while (words.size() < 50) {
        const std::size_t len = 3 + rng.uniform_index(5);
        std::string w;
        for (std::size_t i = 0; i < len; ++i) w.push_back('a' + static_cast<char>(rng.uniform_index(26)));
        if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
    }
    return words;
}

namespace {

std::string gen_sentence(const std::vector<std::string>& lexicon, Rng& rng) {
    const std::size_t n_words = 3 + rng.uniform_index(6);
    std::string s;
    for (std::size_t i = 0; i < n_words; ++i) {
        if (i > 0) s.push_back(' ');
        s += lexicon[rng.uniform_index(lexicon.size())];
    }
    return s;
}

}  // namespace

std::vector<std::string> gen_clean(std::size_t n, std::uint64_t lexicon_seed, std::uint64_t rng_seed) {
    const auto lexicon = make_lexicon(lexicon_seed);
    Rng rng(rng_seed);
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(gen_sentence(lexicon, rng));
    return out;
}

// ---------------------------------------------------------------------------
// Mixtures
// ---------------------------------------------------------------------------

void MixtureSpec::validate() const {
    if (origins.empty()) throw std::invalid_argument("mixture needs at least one origin");
    for (const auto& o : origins) {
        if (o.name.empty()) throw std::invalid_argument("origin name must be non-empty");
        double sum = 0.0;
        for (const auto& [q, p] : o.proportions) {
            if (p < 0.0) throw std::invalid_argument("proportions must be non-negative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("proportions for origin '" + o.name + "' must sum to 1");
        o.corruption.validate();
        if (benchmark_mode && !o.corruption.length_preserving)
            throw std::invalid_argument("benchmark mode requires length-preserving corruption (origin '" +
                                        o.name + "')");
    }
}

OriginSpec origin_preset(std::string_view name, std::size_t count, double rate) {
    OriginSpec o;
    o.name = std::string(name);
    o.count = count;
    o.corruption = CorruptionConfig::uniform_length_preserving(rate);
    if (name == "rev-like") {
        o.proportions = {{QualityClass::CleanCorrection, 0.30},
                         {QualityClass::Identity, 0.10},
                         {QualityClass::InfoChange, 0.45},
                         {QualityClass::BadEdit, 0.15}};
    } else if (name == "rt-like") {
        o.proportions = {{QualityClass::CleanCorrection, 0.35},
                         {QualityClass::Identity, 0.15},
                         {QualityClass::PartialCorrection, 0.20},
                         {QualityClass::BadEdit, 0.30}};
        o.corruption.op_mix = {0.0, 0.0, 0.75, 0.25};  // transposition heavy
    } else if (name == "crowd-like") {
        o.proportions = {{QualityClass::CleanCorrection, 0.40},
                         {QualityClass::PartialCorrection, 0.30},
                         {QualityClass::InfoChange, 0.10},
                         {QualityClass::BadEdit, 0.20}};
    } else if (name == "trusted") {
        o.proportions = {{QualityClass::CleanCorrection, 0.90}, {QualityClass::Identity, 0.10}};
    } else {
        throw std::invalid_argument("unknown origin preset: '" + std::string(name) + "'");
    }
    return o;
}

std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("largest_remainder: negative weight");
        sum += w;
    }
    if (sum <= 0.0) throw std::invalid_argument("largest_remainder: weights sum to zero");
    std::vector<std::size_t> counts(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;  // (-frac, index) for stable sort
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double share = static_cast<double>(total) * weights[i] / sum;
        counts[i] = static_cast<std::size_t>(std::floor(share));
        assigned += counts[i];
        remainders.emplace_back(-(share - std::floor(share)), i);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
    return counts;
}

// ---------------------------------------------------------------------------
// Dataset synthesis
// ---------------------------------------------------------------------------

namespace {

struct ForcedEdit {
    CorruptOp op;      // Replace or Transpose only
    std::size_t pos;
    char replacement;  // for Replace
};

void apply_forced(std::string& s, const ForcedEdit& e) {
    if (e.op == CorruptOp::Replace) {
        s[e.pos] = e.replacement;
    } else {
        std::swap(s[e.pos], s[e.pos + 1]);
    }
}

// k non-overlapping length-preserving corruptions of `clean`.
std::vector<ForcedEdit> sample_forced_edits(const std::string& clean, std::size_t k,
                                            const CorruptionConfig& cfg, Rng& rng) {
    const double wt = cfg.op_mix[static_cast<int>(CorruptOp::Transpose)];
    const double wr = cfg.op_mix[static_cast<int>(CorruptOp::Replace)];
    const double p_transpose = (wt + wr > 0.0) ? wt / (wt + wr) : 0.0;
    std::vector<bool> used(clean.size(), false);
    std::vector<ForcedEdit> edits;
    std::size_t attempts = 0;
    while (edits.size() < k && attempts < 1000) {
        ++attempts;
        const std::size_t pos = rng.uniform_index(clean.size());
        if (rng.bernoulli(p_transpose)) {
            if (pos + 1 >= clean.size() || used[pos] || used[pos + 1]) continue;
            if (clean[pos] == clean[pos + 1]) continue;  // no-op swap
            used[pos] = used[pos + 1] = true;
            edits.push_back({CorruptOp::Transpose, pos, '\0'});
        } else {
            if (used[pos]) continue;
            used[pos] = true;
            edits.push_back({CorruptOp::Replace, pos, random_other_char(rng, clean[pos])});
        }
    }
    if (edits.size() < k) throw std::runtime_error("could not place forced corruptions");
    return edits;
}

Example build_example(QualityClass q, const std::string& origin, const CorruptionConfig& cfg,
                      const std::vector<std::string>& lexicon, Rng& rng) {
    Example ex;
    ex.origin = origin;
    ex.quality = q;
    const std::string clean = gen_sentence(lexicon, rng);
    switch (q) {
        case QualityClass::CleanCorrection:
            ex.source = corrupt(clean, cfg, rng);
            ex.target = clean;
            break;
        case QualityClass::Identity:
            ex.source = clean;
            ex.target = clean;
            break;
        case QualityClass::PartialCorrection: {
            const std::size_t k = 2 + rng.uniform_index(2);  // k in {2,3}
            const auto edits = sample_forced_edits(clean, k, cfg, rng);
            ex.source = clean;
            for (const auto& e : edits) apply_forced(ex.source, e);
            // Revert a strict non-empty subset: the target keeps the rest.
            const std::size_t reverted = 1 + rng.uniform_index(k - 1);
            std::vector<std::size_t> order(k);
            std::iota(order.begin(), order.end(), 0);
            for (std::size_t i = 0; i + 1 < k; ++i)
                std::swap(order[i], order[i + rng.uniform_index(k - i)]);
            ex.target = clean;
            for (std::size_t i = reverted; i < k; ++i) apply_forced(ex.target, edits[order[i]]);
            break;
        }
        case QualityClass::InfoChange: {
            ex.source = corrupt(clean, cfg, rng);
            std::string other;
            while (other.size() < ex.source.size()) {
                if (!other.empty()) other.push_back(' ');
                other += lexicon[rng.uniform_index(lexicon.size())];
            }
            other.resize(ex.source.size());
            ex.target = other;
            break;
        }
        case QualityClass::BadEdit: {
            ex.source = clean;
            ex.target = corrupt(clean, cfg, rng);
            if (ex.target == ex.source) {
                const std::size_t pos = rng.uniform_index(clean.size());
                ex.target[pos] = random_other_char(rng, clean[pos]);
            }
            break;
        }
    }
    return ex;
}

}  // namespace

std::vector<Example> make_dataset(const MixtureSpec& spec, std::uint64_t rng_seed) {
    spec.validate();
    const auto lexicon = make_lexicon(spec.lexicon_seed);
    std::vector<Example> out;
    std::uint64_t next_id = 0;
    const Rng root(rng_seed);
    for (std::size_t oi = 0; oi < spec.origins.size(); ++oi) {
        const auto& origin = spec.origins[oi];
        Rng rng = root.fork(oi + 1);  // per-origin shard stream
        // Exact class counts via largest-remainder, then a shuffled label order.
        std::vector<double> weights;
        std::vector<QualityClass> classes;
        for (QualityClass q : kAllClasses) {
            const auto it = origin.proportions.find(q);
            if (it != origin.proportions.end() && it->second > 0.0) {
                classes.push_back(q);
                weights.push_back(it->second);
            }
        }
        if (classes.empty() && origin.count > 0)
            throw std::invalid_argument("origin '" + origin.name + "' has no positive class proportion");
        if (origin.count == 0) continue;
        const auto counts = largest_remainder(origin.count, weights);
        std::vector<QualityClass> labels;
        labels.reserve(origin.count);
        for (std::size_t c = 0; c < classes.size(); ++c)
            labels.insert(labels.end(), counts[c], classes[c]);
        for (std::size_t i = 0; i + 1 < labels.size(); ++i)
            std::swap(labels[i], labels[i + rng.uniform_index(labels.size() - i)]);
        for (QualityClass q : labels) {
            Example ex = build_example(q, origin.name, origin.corruption, lexicon, rng);
            ex.id = next_id++;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> column_names(DatasetColumns c) {
    std::vector<std::string> names = {"id", "origin", "quality", "source", "target"};
    if (c.weight) names.push_back("weight");
    if (c.scores) {
        names.push_back("ppl_minus");
        names.push_back("ppl_plus");
        names.push_back("delta_ppl");
    }
    if (c.dppl) names.push_back("dppl");
    return names;
}

}  // namespace

DatasetColumns DatasetColumns::infer(const std::vector<DatasetRow>& rows) {
    DatasetColumns c;
    for (const auto& r : rows) {
        c.weight = c.weight || r.example.weight.has_value();
        c.scores = c.scores || r.ppl_minus.has_value() || r.ppl_plus.has_value() || r.delta_ppl.has_value();
        c.dppl = c.dppl || r.dppl.has_value();
    }
    return c;
}

DatasetWriter::DatasetWriter(const std::string& path, DatasetColumns columns)
    : out_(path, std::ios::binary), path_(path), columns_(columns) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    out_ << "#fields:";
    for (const auto& name : column_names(columns_)) out_ << '\t' << name;
    out_ << '\n';
}

void DatasetWriter::write(const DatasetRow& row) {
    const auto& ex = row.example;
    if (ex.source.empty() || ex.target.empty())
        throw std::invalid_argument("example " + std::to_string(ex.id) + ": empty source or target");
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    out_ << ex.id << '\t' << ex.origin << '\t' << (ex.quality ? to_string(*ex.quality) : std::string_view())
         << '\t' << ex.source << '\t' << ex.target;
    if (columns_.weight) out_ << '\t' << opt(ex.weight);
    if (columns_.scores)
        out_ << '\t' << opt(row.ppl_minus) << '\t' << opt(row.ppl_plus) << '\t' << opt(row.delta_ppl);
    if (columns_.dppl) out_ << '\t' << opt(row.dppl);
    out_ << '\n';
    if (!out_) throw std::runtime_error("write failed on '" + path_ + "'");
}

void DatasetWriter::close() {
    if (out_.is_open()) {
        out_.flush();
        if (!out_) throw std::runtime_error("write failed on '" + path_ + "'");
        out_.close();
    }
}

DatasetReader::DatasetReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string header;
    if (!std::getline(in_, header)) return;  // empty file: empty dataset
    ++line_no_;
    if (!header.starts_with("#fields:"))
        throw std::runtime_error(path + ":1: expected '#fields:' header");
    auto fields = split_tabs(header);
    for (std::size_t i = 1; i < fields.size(); ++i) field_names_.emplace_back(fields[i]);
    const std::vector<std::string> base = {"id", "origin", "quality", "source", "target"};
    if (field_names_.size() < base.size() ||
        !std::equal(base.begin(), base.end(), field_names_.begin()))
        throw std::runtime_error(path + ":1: header must start with id, origin, quality, source, target");
    for (std::size_t i = base.size(); i < field_names_.size(); ++i) {
        const auto& n = field_names_[i];
        if (n == "weight") columns_.weight = true;
        else if (n == "ppl_minus" || n == "ppl_plus" || n == "delta_ppl") columns_.scores = true;
        else if (n == "dppl") columns_.dppl = true;
        else throw std::runtime_error(path + ":1: unknown column '" + n + "'");
    }
}

std::optional<DatasetRow> DatasetReader::next() {
    std::string line;
    if (!std::getline(in_, line)) return std::nullopt;
    ++line_no_;
    const auto loc = [&](const char* field) {
        return path_ + ":" + std::to_string(line_no_) + ": field '" + field + "'";
    };
    const auto fields = split_tabs(line);
    if (fields.size() != field_names_.size())
        throw std::runtime_error(path_ + ":" + std::to_string(line_no_) + ": expected " +
                                 std::to_string(field_names_.size()) + " fields, got " +
                                 std::to_string(fields.size()));
    DatasetRow row;
    try {
        row.example.id = parse_u64(fields[0]);
    } catch (const std::exception& e) {
        throw std::runtime_error(loc("id") + ": " + e.what());
    }
    if (!seen_ids_.insert(row.example.id).second)
        throw std::runtime_error(loc("id") + ": duplicate id " + std::to_string(row.example.id));
    row.example.origin = std::string(fields[1]);
    if (!fields[2].empty()) {
        try {
            row.example.quality = quality_from_string(fields[2]);
        } catch (const std::exception& e) {
            throw std::runtime_error(loc("quality") + ": " + e.what());
        }
    }
    row.example.source = std::string(fields[3]);
    row.example.target = std::string(fields[4]);
    if (row.example.source.empty()) throw std::runtime_error(loc("source") + ": empty");
    if (row.example.target.empty()) throw std::runtime_error(loc("target") + ": empty");
    std::size_t idx = 5;
    auto parse_opt = [&](const char* name) -> std::optional<double> {
        const auto f = fields[idx++];
        if (f.empty()) return std::nullopt;
        try {
            return parse_double(f);
        } catch (const std::exception& e) {
            throw std::runtime_error(loc(name) + ": " + e.what());
        }
    };
    for (std::size_t i = 5; i < field_names_.size(); ++i) {
        const auto& n = field_names_[i];
        if (n == "weight") row.example.weight = parse_opt("weight");
        else if (n == "ppl_minus") row.ppl_minus = parse_opt("ppl_minus");
        else if (n == "ppl_plus") row.ppl_plus = parse_opt("ppl_plus");
        else if (n == "delta_ppl") row.delta_ppl = parse_opt("delta_ppl");
        else if (n == "dppl") row.dppl = parse_opt("dppl");
    }
    return row;
}

std::vector<DatasetRow> read_dataset(const std::string& path) {
    DatasetReader reader(path);
    std::vector<DatasetRow> rows;
    while (auto row = reader.next()) rows.push_back(std::move(*row));
    return rows;
}

void write_dataset(const std::string& path, const std::vector<DatasetRow>& rows) {
    DatasetWriter writer(path, DatasetColumns::infer(rows));
    for (const auto& r : rows) writer.write(r);
    writer.close();
}

void write_dataset(const std::string& path, const std::vector<Example>& examples) {
    DatasetColumns cols;
    for (const auto& e : examples) cols.weight = cols.weight || e.weight.has_value();
    DatasetWriter writer(path, cols);
    for (const auto& e : examples) writer.write(e);
    writer.close();
}

std::uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for digest");
    char buf[1 << 16];
    std::uint64_t h = 0xcbf29ce484222325ULL;
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

}  // namespace dlp
