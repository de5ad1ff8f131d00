#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dlp/scoring.hpp"
#include "dlp/trainer.hpp"
#include "test_util.hpp"

using namespace dlp;

namespace {

Example make_example(std::uint64_t id, std::string src, std::string tgt) {
    Example ex;
    ex.id = id;
    ex.source = std::move(src);
    ex.target = std::move(tgt);
    ex.origin = "test";
    return ex;
}

Checkpoint make_ckpt(std::uint64_t seed) {
    Checkpoint c;
    c.config.seed = seed;
    c.params = TransducerParams::init(c.config, seed);
    return c;
}

}  // namespace

TEST_CASE("rank fixture: deltas [-2,-1,0,1] map to [1.0, 0.75, 0.5, 0.25]") {
    CHECK(dppl_of_deltas({-2, -1, 0, 1}) == std::vector<double>{1.0, 0.75, 0.5, 0.25});
}

TEST_CASE("rank ties: all equal deltas share dppl 1.0") {
    CHECK(dppl_of_deltas({0.3, 0.3, 0.3}) == std::vector<double>{1.0, 1.0, 1.0});
    // partial ties share the strict-less count of the group start
    CHECK(dppl_of_deltas({-1, 0, 0, 2}) == std::vector<double>{1.0, 0.75, 0.75, 0.25});
}

TEST_CASE("rank: odd N distinct scores put the median at 1 - ((N-1)/2)/N") {
    const std::size_t n = 101;
    std::vector<double> deltas;
    for (std::size_t i = 0; i < n; ++i) deltas.push_back(static_cast<double>(i) * 0.1 - 3.0);
    const auto dppl = dppl_of_deltas(deltas);
    const std::size_t median_index = (n - 1) / 2;  // deltas already sorted ascending
    CHECK(dppl[median_index] ==
          1.0 - static_cast<double>(median_index) / static_cast<double>(n));
    CHECK(std::abs(dppl[median_index] - 0.5) < 1.0 / static_cast<double>(n));
    // extremes: best (most negative) is 1.0, worst is 1/N
    CHECK(dppl.front() == 1.0);
    CHECK(dppl.back() == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-12));
}

TEST_CASE("rank properties: antitone, shift-invariant, permutation-invariant, in (0,1]") {
    Rng rng(77);
    std::vector<double> deltas;
    for (int i = 0; i < 300; ++i) deltas.push_back(rng.uniform_real(-4.0, 4.0));
    const auto dppl = dppl_of_deltas(deltas);
    for (double v : dppl) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
    for (std::size_t i = 0; i < deltas.size(); i += 7)
        for (std::size_t j = 0; j < deltas.size(); j += 11) {
            if (deltas[i] < deltas[j]) CHECK(dppl[i] > dppl[j]);
            if (deltas[i] == deltas[j]) CHECK(dppl[i] == dppl[j]);
        }

    auto shifted = deltas;
    for (double& v : shifted) v += 17.25;
    CHECK(dppl_of_deltas(shifted) == dppl);

    auto perm = deltas;
    std::reverse(perm.begin(), perm.end());
    auto perm_dppl = dppl_of_deltas(perm);
    std::reverse(perm_dppl.begin(), perm_dppl.end());
    CHECK(perm_dppl == dppl);
}

TEST_CASE("rank: empty dataset is an error") {
    CHECK_THROWS(dppl_of_deltas({}));
    std::vector<ScoredExample> empty;
    CHECK_THROWS(dppl_ranks(empty));
}

TEST_CASE("delta arithmetic: 2.69 -> 2.44 is exactly -0.25") {
    const double ppl_minus = 2.69, ppl_plus = 2.44;
    CHECK(ppl_plus - ppl_minus == -0.25);
}

TEST_CASE("delta_ppl: identical checkpoints give exactly zero") {
    const auto theta = make_ckpt(3);
    const auto s = delta_ppl(theta, theta, make_example(1, "hello world", "hellx world"));
    CHECK(s.delta_ppl == 0.0);
    CHECK(s.ppl_minus == s.ppl_plus);
    CHECK(s.ppl_minus > 0.0);
}

TEST_CASE("delta_ppl: one SGD step on the example itself makes delta negative") {
    auto theta_minus = make_ckpt(4);
    const auto ex = make_example(1, "training example", "training example");
    Checkpoint theta_plus = theta_minus;
    Gradients g = TransducerParams::zeros(theta_plus.config);
    loss_and_grad(theta_plus.params, theta_plus.config, {{ex, 1.0}}, g);
    sgd_step(theta_plus.params, g, 1e-2);
    const auto s = delta_ppl(theta_minus, theta_plus, ex);
    CHECK(s.delta_ppl < 0.0);
    CHECK(s.delta_ppl == s.ppl_plus - s.ppl_minus);
}

TEST_CASE("delta_ppl: normalize_by_length divides by target length") {
    const auto tm = make_ckpt(5);
    const auto tp = make_ckpt(6);
    const auto ex = make_example(1, "twelve chars", "twelve chars");
    const auto total = delta_ppl(tm, tp, ex, false);
    const auto norm = delta_ppl(tm, tp, ex, true);
    const double n = static_cast<double>(ex.target.size());
    CHECK(norm.ppl_minus == doctest::Approx(total.ppl_minus / n).epsilon(1e-12));
    CHECK(norm.delta_ppl == doctest::Approx(total.delta_ppl / n).epsilon(1e-12));
}

TEST_CASE("delta_ppl: config mismatch between checkpoints is an error") {
    auto a = make_ckpt(1);
    Checkpoint b;
    b.config.hidden_dim = 32;
    b.params = TransducerParams::init(b.config, 2);
    CHECK_THROWS(delta_ppl(a, b, make_example(1, "ab", "ab")));
}

TEST_CASE("score_dataset: empty input, order preservation, purity") {
    const auto tm = make_ckpt(7);
    const auto tp = make_ckpt(8);
    CHECK(score_dataset({}, tm, tp).empty());

    std::vector<Example> base;
    const auto sentences = gen_clean(40, 1, 9);
    for (std::size_t i = 0; i < sentences.size(); ++i)
        base.push_back(make_example(i, sentences[i], sentences[i]));
    const auto scored = score_dataset(base, tm, tp, false, 1);
    REQUIRE(scored.size() == base.size());
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(scored[i].example == base[i]);

    // permuting the input permutes the output identically
    auto perm = base;
    std::reverse(perm.begin(), perm.end());
    const auto scored_perm = score_dataset(perm, tm, tp, false, 1);
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(scored_perm[base.size() - 1 - i].delta_ppl == scored[i].delta_ppl);

    // scoring twice yields identical results; thread count does not matter
    const auto again = score_dataset(base, tm, tp, false, 4);
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(again[i].delta_ppl == scored[i].delta_ppl);
        CHECK(again[i].ppl_minus == scored[i].ppl_minus);
    }
}

TEST_CASE("score_dataset: per-example failures carry the example id") {
    const auto tm = make_ckpt(10);
    const auto tp = make_ckpt(11);
    std::vector<Example> base = {make_example(0, "fine pair", "fine pair"),
                                 make_example(77, "BAD", "bad")};
    CHECK_THROWS_WITH_AS(score_dataset(base, tm, tp), doctest::Contains("77"),
                         std::runtime_error);
}

TEST_CASE("scored rows round-trip through the dataset file format") {
    testutil::TempDir tmp("scoring_rows");
    const auto tm = make_ckpt(12);
    const auto tp = make_ckpt(13);
    std::vector<Example> base;
    const auto sentences = gen_clean(25, 2, 14);
    for (std::size_t i = 0; i < sentences.size(); ++i)
        base.push_back(make_example(i, sentences[i], sentences[i]));
    auto scored = score_dataset(base, tm, tp);
    dppl_ranks(scored);
    const auto path = tmp.file("scored.tsv");
    write_dataset(path, scored_to_rows(scored));
    const auto back = rows_to_scored(read_dataset(path));
    REQUIRE(back.size() == scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        CHECK(back[i].example == scored[i].example);
        CHECK(back[i].delta_ppl == scored[i].delta_ppl);  // shortest-round-trip doubles
        CHECK(back[i].dppl == scored[i].dppl);
    }
}

TEST_CASE("score manifest sidecar records provenance") {
    testutil::TempDir tmp("scoring_manifest");
    const auto path = tmp.file("scored.tsv");
    std::ofstream(path, std::ios::binary) << "#fields:\tid\torigin\tquality\tsource\ttarget\n";
    write_score_manifest(path, {"a.ckpt", "b.ckpt", 12345});
    const auto text = testutil::slurp(path + ".manifest.json");
    CHECK(text.find("a.ckpt") != std::string::npos);
    CHECK(text.find("b.ckpt") != std::string::npos);
    CHECK(text.find("12345") != std::string::npos);
}
