#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "nca/eval.hpp"

using namespace nca;

namespace {

std::set<std::pair<Tag, std::string>> ref(std::initializer_list<std::pair<const char*, const char*>> pairs) {
    std::set<std::pair<Tag, std::string>> out;
    for (const auto& [t, c] : pairs) out.emplace(parse_tag(t), c);
    return out;
}

}  // namespace

TEST_CASE("score on a perfect prediction") {
    auto reference = ref({{"natural=peak", "mountain"}, {"place=town", "town"}});
    std::set<AlignmentPair> predicted;
    for (const auto& [tag, cls] : reference) predicted.insert({tag, cls, 0.9});
    auto m = score(predicted, reference);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
}

TEST_CASE("score arithmetic on the tp=2 fp=1 fn=1 case") {
    auto reference = ref({{"a=1", "A"}, {"b=2", "B"}, {"c=3", "C"}});
    std::set<AlignmentPair> predicted = {{parse_tag("a=1"), "A", 0.9},
                                         {parse_tag("b=2"), "B", 0.8},
                                         {parse_tag("d=4"), "D", 0.7}};
    auto m = score(predicted, reference);
    CHECK(m.tp == 2);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.precision == Catch::Approx(2.0 / 3.0));
    CHECK(m.recall == Catch::Approx(2.0 / 3.0));
    CHECK(m.f1 == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("degenerate ratios are defined as zero") {
    auto reference = ref({{"a=1", "A"}});
    auto m = score({}, reference);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);

    auto empty_both = score({}, {});
    CHECK(empty_both.f1 == 0.0);
}

TEST_CASE("confidences are ignored for scoring; key-only and tagged predictions are distinct") {
    auto reference = ref({{"name", "label"}});
    std::set<AlignmentPair> right = {{parse_tag("name"), "label", 0.01}};
    CHECK(score(right, reference).tp == 1);
    std::set<AlignmentPair> wrong = {{parse_tag("name=x"), "label", 0.99}};
    CHECK(score(wrong, reference).tp == 0);
    CHECK(score(wrong, reference).fp == 1);
}

TEST_CASE("f1 bounds hold on fuzzed inputs") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 300; ++trial) {
        std::set<AlignmentPair> predicted;
        std::set<std::pair<Tag, std::string>> reference;
        for (int i = 0; i < 12; ++i) {
            Tag tag("k" + std::to_string(rng() % 8), "v");
            std::string cls = "c" + std::to_string(rng() % 4);
            if (rng() % 2) predicted.insert({tag, cls, 0.5});
            if (rng() % 2) reference.insert({tag, cls});
        }
        auto m = score(predicted, reference);
        CHECK(m.f1 <= 2.0 * std::min(m.precision, m.recall) + 1e-12);
        CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-12);
        CHECK(m.precision >= 0.0);
        CHECK(m.precision <= 1.0);
        CHECK(m.recall >= 0.0);
        CHECK(m.recall <= 1.0);
    }
}

TEST_CASE("score does not depend on iteration order") {
    // sets already canonicalize order; verify equality of results from
    // differently-constructed sets
    std::set<AlignmentPair> p1 = {{parse_tag("a=1"), "A", 0.9}, {parse_tag("b=2"), "B", 0.8}};
    std::set<AlignmentPair> p2 = {{parse_tag("b=2"), "B", 0.1}, {parse_tag("a=1"), "A", 0.2}};
    auto reference = ref({{"a=1", "A"}});
    auto m1 = score(p1, reference);
    auto m2 = score(p2, reference);
    CHECK(m1.tp == m2.tp);
    CHECK(m1.fp == m2.fp);
    CHECK(m1.f1 == m2.f1);
}

namespace {

// Confidence-thresholding producer over a fixed scored pair set, the same
// shape the CLI uses for model sweeps.
std::function<std::set<AlignmentPair>(double)> make_producer(
    const std::set<AlignmentPair>& scored) {
    return [scored](double t) {
        std::set<AlignmentPair> kept;
        for (const auto& p : scored)
            if (p.confidence > t) kept.insert(p);
        return kept;
    };
}

}  // namespace

TEST_CASE("sweep basics") {
    auto reference = ref({{"a=1", "A"}, {"b=2", "B"}});
    std::set<AlignmentPair> scored = {{parse_tag("a=1"), "A", 0.9},
                                      {parse_tag("b=2"), "B", 0.3},
                                      {parse_tag("c=3"), "C", 0.6}};
    auto produce = make_producer(scored);

    SECTION("threshold 0 reaches the ceiling recall") {
        auto result = sweep(produce, reference, {0.0});
        CHECK(result.rows.size() == 1);
        CHECK(result.rows[0].metrics.recall == 1.0);
    }
    SECTION("threshold 1 yields empty predictions and zero recall") {
        auto result = sweep(produce, reference, {1.0});
        CHECK(result.rows[0].metrics.recall == 0.0);
    }
    SECTION("recall is antitone across the grid and the best F1 is reported") {
        auto result = sweep(produce, reference, threshold_grid(0.05), true);
        double prev = 1.0;
        for (const auto& row : result.rows) {
            CHECK(row.metrics.recall <= prev + 1e-12);
            prev = row.metrics.recall;
        }
        for (const auto& row : result.rows) CHECK(result.best.f1 >= row.metrics.f1);
        // between 0.3 and 0.6 only the true pairs a and the false c remain at
        // t in [0.3,0.6); best F1 is at thresholds below 0.3 (P=2/3,R=1)
        CHECK(result.best.recall == 1.0);
    }
    SECTION("empty threshold list is an error") {
        CHECK_THROWS_AS(sweep(produce, reference, {}), std::invalid_argument);
    }
}

TEST_CASE("threshold grid covers [0,1]") {
    auto grid = threshold_grid(0.05);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 1.0);
    CHECK(grid.size() == 21);
    CHECK_THROWS_AS(threshold_grid(0.0), std::invalid_argument);
}

TEST_CASE("sweep report formats") {
    auto reference = ref({{"a=1", "A"}});
    std::set<AlignmentPair> scored = {{parse_tag("a=1"), "A", 0.9}};
    auto result = sweep(make_producer(scored), reference, {0.0, 0.5}, true);
    auto tsv = sweep_to_tsv(result);
    CHECK(tsv.find("threshold\tprecision\trecall\tf1\n") == 0);
    CHECK(tsv.find("0.00\t1.000000\t1.000000\t1.000000") != std::string::npos);
    auto j = metrics_to_json(result.best);
    CHECK(j["f1"].get<double>() == 1.0);
    CHECK(j["tp"].get<std::size_t>() == 1);
}
