#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "nca/features.hpp"
#include "nca/ingest.hpp"
#include "nca/synth.hpp"
#include "test_util.hpp"

using namespace nca;
using testutil::TempDir;

TEST_CASE("fixture generation is deterministic per seed") {
    SynthConfig cfg;
    cfg.classes = 4;
    cfg.nodes_per_class = 20;
    cfg.noise = 0.25;
    cfg.seed = 77;
    auto a = generate_fixture(cfg);
    auto b = generate_fixture(cfg);
    CHECK(a.osm_jsonl == b.osm_jsonl);
    CHECK(a.kg_triples == b.kg_triples);
    CHECK(a.link_triples == b.link_triples);
    CHECK(a.ground_truth_tsv == b.ground_truth_tsv);

    cfg.seed = 78;
    auto c = generate_fixture(cfg);
    CHECK(a.osm_jsonl != c.osm_jsonl);
}

TEST_CASE("ground truth has exactly k rows") {
    SynthConfig cfg;
    cfg.classes = 7;
    cfg.nodes_per_class = 5;
    auto fx = generate_fixture(cfg);
    std::istringstream in(fx.ground_truth_tsv);
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 7);
    CHECK(fx.class_tags.size() == 7);
}

TEST_CASE("zero noise makes the mapping recoverable by construction") {
    SynthConfig cfg;
    cfg.classes = 3;
    cfg.nodes_per_class = 10;
    cfg.noise = 0.0;
    auto fx = generate_fixture(cfg);

    TempDir dir;
    auto paths = write_fixture(fx, dir / "fx");
    auto osm = load_osm(paths.osm);
    REQUIRE(osm.nodes.size() == 30);
    // every node carries exactly one class tag (its own), plus a name and at
    // most its matching auxiliary tag; no distractors at zero noise
    for (const auto& [id, node] : osm.nodes) {
        int class_tags = 0, own_class = -1;
        for (int i = 0; i < 3; ++i) {
            if (node.tags.count(fx.class_tags[i])) {
                ++class_tags;
                own_class = i;
            }
        }
        CHECK(class_tags == 1);
        CHECK(node.tags.count(Tag("name", "Node " + std::to_string(id))) == 1);
        for (const auto& tag : node.tags) {
            if (tag.key.rfind("feat", 0) == 0)
                CHECK(tag.key == "feat" + std::string(own_class == 0 ? "000"
                                                      : own_class == 1 ? "001"
                                                                       : "002"));
        }
    }
}

TEST_CASE("fixture ingests into a consistent dataset") {
    SynthConfig cfg;
    cfg.classes = 3;
    cfg.nodes_per_class = 12;
    cfg.noise = 0.2;
    auto fx = generate_fixture(cfg);
    TempDir dir;
    auto paths = write_fixture(fx, dir / "fx");

    IngestConfig icfg;
    icfg.min_entities_per_class = 10;
    auto osm = load_osm(paths.osm);
    auto kg = load_kg(paths.kg, icfg);
    auto links = extract_links(paths.links, icfg);
    CHECK(osm.rejected == 0);
    CHECK(kg.rejected == 0);
    CHECK(links.rejected == 0);
    auto dataset = build_dataset(osm.nodes, kg.entities, links.links, icfg);
    CHECK(dataset.classes.size() == 3);
    CHECK(dataset.links.size() == 36);

    // class-indicative properties exist and the type predicate is excluded
    FeatureConfig fcfg;
    fcfg.min_tag_occurrences = 5;
    fcfg.min_value_frequency = 5;
    auto space = build_feature_space(dataset, fcfg);
    CHECK(space.class_count() == 3);
    for (const auto& tag : fx.class_tags)
        CHECK(space.osm_dims.count(canonical_tag_string(tag)) == 1);
    CHECK(space.osm_dims.count("name") == 1);
    CHECK(space.kg_dims.count(icfg.type_predicate) == 0);
}

TEST_CASE("swap noise replaces the class tag instead of adding one") {
    SynthConfig cfg;
    cfg.classes = 4;
    cfg.nodes_per_class = 50;
    cfg.noise = 0.5;
    cfg.noise_mode = NoiseMode::Swap;
    cfg.seed = 3;
    auto fx = generate_fixture(cfg);
    TempDir dir;
    auto osm = load_osm(write_fixture(fx, dir / "fx").osm);
    std::size_t swapped = 0;
    for (const auto& [id, node] : osm.nodes) {
        int class_tags = 0;
        for (const auto& tag : fx.class_tags) class_tags += node.tags.count(tag);
        CHECK(class_tags == 1);  // never two class tags in swap mode
        // nodes are generated class-major, 50 per class
        const int own = static_cast<int>((id - 1000001) / 50);
        if (!node.tags.count(fx.class_tags[own])) ++swapped;
    }
    CHECK(swapped > 50);  // about half of 200 nodes
    CHECK(swapped < 150);
}

TEST_CASE("config validation") {
    SynthConfig cfg;
    cfg.classes = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SynthConfig{};
    cfg.noise = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
