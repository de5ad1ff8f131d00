#include "dlp/evalreport.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "dlp/text.hpp"

namespace dlp {

std::vector<Edit> edit_set(std::string_view from, std::string_view to) {
    if (from.size() != to.size())
        throw std::invalid_argument("edit_set: sequences differ in length");
    std::vector<Edit> edits;
    for (std::size_t i = 0; i < from.size(); ++i)
        if (from[i] != to[i]) edits.push_back({i, from[i], to[i]});
    return edits;
}

EvalReport edit_f_beta(const std::vector<std::string>& sources,
                       const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references, double beta) {
    if (sources.size() != hypotheses.size() || sources.size() != references.size())
        throw std::invalid_argument("edit_f_beta: input lists differ in length");
    EvalReport report;
    std::size_t tp = 0, fp = 0, fn = 0, exact = 0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (sources[i].size() != hypotheses[i].size() || sources[i].size() != references[i].size()) {
            ++report.skipped;
            continue;
        }
        ++report.n;
        if (hypotheses[i] == references[i]) ++exact;
        const auto hyp = edit_set(sources[i], hypotheses[i]);
        const auto ref = edit_set(sources[i], references[i]);
        // Both sets are position-sorted; intersect with a merge walk.
        std::size_t a = 0, b = 0, matched = 0;
        while (a < hyp.size() && b < ref.size()) {
            if (hyp[a] == ref[b]) {
                ++matched;
                ++a;
                ++b;
            } else if (hyp[a] < ref[b]) {
                ++a;
            } else {
                ++b;
            }
        }
        tp += matched;
        fp += hyp.size() - matched;
        fn += ref.size() - matched;
    }
    report.exact_match = report.n ? static_cast<double>(exact) / static_cast<double>(report.n) : 0.0;
    if (tp + fp > 0)
        report.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    else
        report.precision = (fn == 0) ? 1.0 : 0.0;  // no proposed edits
    report.recall = (tp + fn > 0) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    const double b2 = beta * beta;
    const double denom = b2 * report.precision + report.recall;
    report.f_beta = denom > 0.0 ? (1.0 + b2) * report.precision * report.recall / denom : 0.0;
    return report;
}

double dppl_auc(const std::vector<ScoredExample>& scored,
                const std::vector<QualityClass>& positive_classes,
                const std::vector<QualityClass>& negative_classes) {
    auto member = [](const std::vector<QualityClass>& set, QualityClass q) {
        return std::find(set.begin(), set.end(), q) != set.end();
    };
    std::vector<std::pair<double, bool>> points;  // (score, is_positive)
    for (const auto& s : scored) {
        if (!s.example.quality) continue;
        if (!s.dppl) throw std::invalid_argument("dppl_auc: dppl missing");
        if (member(positive_classes, *s.example.quality))
            points.emplace_back(*s.dppl, true);
        else if (member(negative_classes, *s.example.quality))
            points.emplace_back(*s.dppl, false);
    }
    std::size_t npos = 0;
    for (const auto& [score, pos] : points) npos += pos;
    const std::size_t nneg = points.size() - npos;
    if (npos == 0 || nneg == 0)
        throw std::invalid_argument("dppl_auc: a class group is empty");
    // Mann-Whitney with mid-ranks for ties.
    std::sort(points.begin(), points.end());
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < points.size()) {
        std::size_t j = i;
        while (j < points.size() && points[j].first == points[i].first) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (points[k].second) rank_sum_pos += mid_rank;
        i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(npos) * (static_cast<double>(npos) + 1.0) / 2.0;
    return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

namespace {

std::string group_of(const ScoredExample& s, GroupKey key) {
    if (key == GroupKey::Origin) return s.example.origin;
    return s.example.quality ? std::string(to_string(*s.example.quality)) : std::string("unlabeled");
}

std::size_t dppl_bin(double dppl, std::size_t bins) {
    if (dppl >= 1.0) return bins - 1;
    return static_cast<std::size_t>(dppl * static_cast<double>(bins));
}

}  // namespace

RankHistogram rank_histogram(const std::vector<ScoredExample>& scored, GroupKey key,
                             std::size_t bins) {
    if (bins < 1) throw std::invalid_argument("rank_histogram: bins must be >= 1");
    std::map<std::string, std::size_t> group_index;
    for (const auto& s : scored) group_index.emplace(group_of(s, key), 0);
    RankHistogram hist;
    for (auto& [name, idx] : group_index) {
        idx = hist.groups.size();
        hist.groups.push_back(name);
    }
    hist.bin_counts.assign(bins, 0);
    hist.group_counts.assign(bins, std::vector<std::size_t>(hist.groups.size(), 0));
    hist.proportions.assign(bins, std::vector<double>(hist.groups.size(), 0.0));
    for (const auto& s : scored) {
        if (!s.dppl) throw std::invalid_argument("rank_histogram: dppl missing");
        const std::size_t b = dppl_bin(*s.dppl, bins);
        ++hist.bin_counts[b];
        ++hist.group_counts[b][group_index.at(group_of(s, key))];
    }
    for (std::size_t b = 0; b < bins; ++b)
        if (hist.bin_counts[b] > 0)
            for (std::size_t g = 0; g < hist.groups.size(); ++g)
                hist.proportions[b][g] = static_cast<double>(hist.group_counts[b][g]) /
                                         static_cast<double>(hist.bin_counts[b]);
    return hist;
}

void write_report_tables(const std::string& out_dir, const std::vector<ScoredExample>& scored,
                         GroupKey key, std::size_t bins) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto hist = rank_histogram(scored, key, bins);

    {
        std::ofstream out(fs::path(out_dir) / "rank_hist.tsv", std::ios::binary);
        out << "#fields:\tbin\tdppl_lo\tdppl_hi\tcount";
        for (const auto& g : hist.groups) out << '\t' << g;
        out << '\n';
        for (std::size_t b = 0; b < bins; ++b) {
            out << b << '\t' << format_double(static_cast<double>(b) / static_cast<double>(bins))
                << '\t' << format_double(static_cast<double>(b + 1) / static_cast<double>(bins))
                << '\t' << hist.bin_counts[b];
            for (std::size_t g = 0; g < hist.groups.size(); ++g)
                out << '\t' << format_double(hist.proportions[b][g]);
            out << '\n';
        }
    }

    {
        // delta_ppl histogram over the observed range, same group columns
        double lo = 0.0, hi = 0.0;
        if (!scored.empty()) {
            lo = hi = scored.front().delta_ppl;
            for (const auto& s : scored) {
                lo = std::min(lo, s.delta_ppl);
                hi = std::max(hi, s.delta_ppl);
            }
        }
        const double width = (hi > lo) ? (hi - lo) / static_cast<double>(bins) : 1.0;
        std::map<std::string, std::size_t> group_index;
        for (std::size_t g = 0; g < hist.groups.size(); ++g) group_index[hist.groups[g]] = g;
        std::vector<std::vector<std::size_t>> counts(bins,
                                                     std::vector<std::size_t>(hist.groups.size(), 0));
        for (const auto& s : scored) {
            std::size_t b = (hi > lo) ? static_cast<std::size_t>((s.delta_ppl - lo) / width) : 0;
            if (b >= bins) b = bins - 1;
            ++counts[b][group_index.at(group_of(s, key))];
        }
        std::ofstream out(fs::path(out_dir) / "delta_hist.tsv", std::ios::binary);
        out << "#fields:\tbin\tdelta_lo\tdelta_hi";
        for (const auto& g : hist.groups) out << '\t' << g;
        out << '\n';
        for (std::size_t b = 0; b < bins; ++b) {
            out << b << '\t' << format_double(lo + width * static_cast<double>(b)) << '\t'
                << format_double(lo + width * static_cast<double>(b + 1));
            for (std::size_t g = 0; g < hist.groups.size(); ++g) out << '\t' << counts[b][g];
            out << '\n';
        }
    }

    {
        std::ofstream out(fs::path(out_dir) / "scatter.tsv", std::ios::binary);
        out << "#fields:\tid\tgroup\tppl_minus\tdelta_ppl\n";
        for (const auto& s : scored)
            out << s.example.id << '\t' << group_of(s, key) << '\t' << format_double(s.ppl_minus)
                << '\t' << format_double(s.delta_ppl) << '\n';
    }
}

}  // namespace dlp
