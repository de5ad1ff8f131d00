#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dlp/evalreport.hpp"
#include "test_util.hpp"

using namespace dlp;

namespace {

std::vector<ScoredExample> labeled(const std::vector<std::pair<double, QualityClass>>& items) {
    std::vector<ScoredExample> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        ScoredExample s;
        s.example.id = i;
        s.example.source = "aa";
        s.example.target = "ab";
        s.example.origin = "o";
        s.example.quality = items[i].second;
        s.delta_ppl = -items[i].first;
        s.ppl_minus = 1.0;
        s.ppl_plus = 1.0 + s.delta_ppl;
        s.dppl = items[i].first;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("edit_set: positional differences of equal-length strings") {
    CHECK(edit_set("abc", "abc").empty());
    const auto e = edit_set("abc", "axc");
    REQUIRE(e.size() == 1);
    CHECK(e[0].position == 1);
    CHECK(e[0].original == 'b');
    CHECK(e[0].replacement == 'x');
    CHECK_THROWS(edit_set("ab", "abc"));
}

TEST_CASE("edit_f_beta: perfect hypothesis scores 1 across the board") {
    const auto r = edit_f_beta({"abc", "dog"}, {"axc", "dig"}, {"axc", "dig"});
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f_beta == 1.0);
    CHECK(r.exact_match == 1.0);
    CHECK(r.n == 2);
}

TEST_CASE("edit_f_beta: copy baseline scores zero when references have edits") {
    const auto r = edit_f_beta({"abc"}, {"abc"}, {"axc"});
    CHECK(r.recall == 0.0);
    CHECK(r.f_beta == 0.0);
    CHECK(r.precision == 0.0);  // zero proposed edits but reference edits exist
}

TEST_CASE("edit_f_beta: all-identity corpus with no edits anywhere has precision 1") {
    const auto r = edit_f_beta({"abc"}, {"abc"}, {"abc"});
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.exact_match == 1.0);
}

TEST_CASE("edit_f_beta: wrong fix on a 3-char item gives TP=0, FP=1, FN=1, F=0") {
    // source "abc"; hypothesis fixes position 2 to 'y', reference wants 'x'
    const auto r = edit_f_beta({"abc"}, {"aby"}, {"abx"});
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f_beta == 0.0);
}

TEST_CASE("edit_f_beta: precision-weighted closed forms") {
    // reference has two edits, hypothesis makes exactly one of them:
    // P=1, R=1/2 -> F0.5 = 1.25*0.5/(0.25+0.5) = 5/6
    const auto half = edit_f_beta({"aaaa"}, {"baaa"}, {"baab"});
    CHECK(half.precision == 1.0);
    CHECK(half.recall == 0.5);
    CHECK(half.f_beta == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(half.f_beta >= 0.5);
    CHECK(half.f_beta <= 1.0);

    // reference has three edits, hypothesis makes two of them:
    // P=1, R=2/3 -> F0.5 = 1.25*(2/3)/(0.25+2/3) = 10/11
    const auto two_thirds = edit_f_beta({"aaaaa"}, {"bbaaa"}, {"bbaab"});
    CHECK(two_thirds.precision == 1.0);
    CHECK(two_thirds.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(two_thirds.f_beta == doctest::Approx(10.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("edit_f_beta: length-mismatched items are skipped and counted") {
    const auto r = edit_f_beta({"abc", "toolong"}, {"axc", "short"}, {"axc", "toolongg"});
    CHECK(r.n == 1);
    CHECK(r.skipped == 1);
    CHECK(r.f_beta == 1.0);
    CHECK_THROWS(edit_f_beta({"a"}, {"a", "b"}, {"a"}));
}

TEST_CASE("dppl_auc: hand case {pos 0.9, 0.6; neg 0.8, 0.1} is 0.75") {
    const auto data = labeled({{0.9, QualityClass::CleanCorrection},
                               {0.6, QualityClass::CleanCorrection},
                               {0.8, QualityClass::InfoChange},
                               {0.1, QualityClass::InfoChange}});
    CHECK(dppl_auc(data, {QualityClass::CleanCorrection}, {QualityClass::InfoChange}) == 0.75);
}

TEST_CASE("dppl_auc: degenerate and perfect separations") {
    const auto flat = labeled({{0.5, QualityClass::CleanCorrection},
                               {0.5, QualityClass::InfoChange},
                               {0.5, QualityClass::CleanCorrection},
                               {0.5, QualityClass::InfoChange}});
    CHECK(dppl_auc(flat, {QualityClass::CleanCorrection}, {QualityClass::InfoChange}) == 0.5);

    const auto perfect = labeled({{0.9, QualityClass::CleanCorrection},
                                  {0.8, QualityClass::CleanCorrection},
                                  {0.2, QualityClass::InfoChange},
                                  {0.1, QualityClass::InfoChange}});
    CHECK(dppl_auc(perfect, {QualityClass::CleanCorrection}, {QualityClass::InfoChange}) == 1.0);

    CHECK_THROWS(dppl_auc(perfect, {QualityClass::BadEdit}, {QualityClass::InfoChange}));
}

TEST_CASE("dppl_auc: invariant under strictly monotone transforms of dppl") {
    Rng rng(3);
    std::vector<std::pair<double, QualityClass>> items;
    for (int i = 0; i < 60; ++i)
        items.emplace_back(0.01 + 0.98 * rng.uniform_real(),
                           rng.bernoulli(0.5) ? QualityClass::CleanCorrection
                                              : QualityClass::InfoChange);
    auto data = labeled(items);
    const double base =
        dppl_auc(data, {QualityClass::CleanCorrection}, {QualityClass::InfoChange});
    for (auto& s : data) s.dppl = std::tanh(3.0 * *s.dppl);  // strictly increasing
    CHECK(dppl_auc(data, {QualityClass::CleanCorrection}, {QualityClass::InfoChange}) == base);
}

TEST_CASE("rank_histogram: single group fills every proportion with 1") {
    const auto data = labeled({{0.1, QualityClass::Identity},
                               {0.5, QualityClass::Identity},
                               {1.0, QualityClass::Identity}});
    const auto hist = rank_histogram(data, GroupKey::Quality, 4);
    REQUIRE(hist.groups.size() == 1);
    for (std::size_t b = 0; b < 4; ++b)
        if (hist.bin_counts[b] > 0) CHECK(hist.proportions[b][0] == 1.0);
    // dppl = 1.0 lands in the last bin
    CHECK(hist.bin_counts[3] >= 1);
}

TEST_CASE("rank_histogram: proportions sum to 1 and mass is conserved") {
    Rng rng(9);
    std::vector<std::pair<double, QualityClass>> items;
    for (int i = 0; i < 500; ++i) {
        const auto q = (i % 3 == 0)   ? QualityClass::CleanCorrection
                       : (i % 3 == 1) ? QualityClass::InfoChange
                                      : QualityClass::BadEdit;
        items.emplace_back(0.001 + 0.999 * rng.uniform_real(), q);
    }
    const auto data = labeled(items);
    const auto hist = rank_histogram(data, GroupKey::Quality, 10);
    std::vector<std::size_t> group_totals(hist.groups.size(), 0);
    for (std::size_t b = 0; b < 10; ++b) {
        if (hist.bin_counts[b] == 0) continue;
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t g = 0; g < hist.groups.size(); ++g) {
            sum += hist.proportions[b][g];
            count += hist.group_counts[b][g];
            group_totals[g] += hist.group_counts[b][g];
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(count == hist.bin_counts[b]);
    }
    std::size_t total = 0;
    for (auto t : group_totals) total += t;
    CHECK(total == data.size());
}

TEST_CASE("write_report_tables emits the three plot files") {
    testutil::TempDir tmp("evalreport_tables");
    const auto data = labeled({{0.2, QualityClass::CleanCorrection},
                               {0.7, QualityClass::InfoChange},
                               {0.9, QualityClass::CleanCorrection}});
    write_report_tables(tmp.file("report"), data, GroupKey::Quality, 5);
    for (const char* f : {"rank_hist.tsv", "delta_hist.tsv", "scatter.tsv"}) {
        const auto text = testutil::slurp((tmp.path() / "report" / f).string());
        CHECK(text.starts_with("#fields:"));
    }
}
