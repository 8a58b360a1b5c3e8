#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "nca/ingest.hpp"
#include "test_util.hpp"

using namespace nca;
using testutil::TempDir;

namespace {

const char* kZugspitzeLine =
    R"({"id":27384190,"lat":47.42,"lon":10.98,"tags":{"natural":"peak","name":"Zugspitze","summit:cross":"yes"}})";

}  // namespace

TEST_CASE("load_osm parses json lines") {
    TempDir dir;
    auto path = dir.file("osm.jsonl", std::string(kZugspitzeLine) + "\n");
    auto result = load_osm(path);
    REQUIRE(result.nodes.size() == 1);
    const auto& node = result.nodes.at(27384190);
    CHECK(node.tags.size() == 3);
    CHECK(node.tags.count(Tag("natural", "peak")) == 1);
    CHECK(node.lat == Catch::Approx(47.42));
}

TEST_CASE("load_osm on empty file yields empty map") {
    TempDir dir;
    auto result = load_osm(dir.file("empty.jsonl", ""));
    CHECK(result.nodes.empty());
    CHECK(result.rejected == 0);
}

TEST_CASE("load_osm counts malformed lines") {
    TempDir dir;
    auto path = dir.file("mixed.jsonl", std::string(kZugspitzeLine) + "\nnot json at all\n");
    auto result = load_osm(path);
    CHECK(result.nodes.size() == 1);
    CHECK(result.rejected == 1);
}

TEST_CASE("load_osm rejects out-of-range coordinates") {
    TempDir dir;
    auto path = dir.file("coords.jsonl",
                         std::string(kZugspitzeLine) + "\n" +
                             R"({"id":2,"lat":95.0,"lon":0,"tags":{}})" + "\n" +
                             R"({"id":3,"lat":0,"lon":-181.0,"tags":{}})" + "\n");
    auto result = load_osm(path);
    CHECK(result.nodes.size() == 1);
    CHECK(result.rejected == 2);
}

TEST_CASE("load_osm fails when every line is malformed") {
    TempDir dir;
    CHECK_THROWS_AS(load_osm(dir.file("bad.jsonl", "oops\n{broken\n")), ConfigError);
}

TEST_CASE("load_osm keeps the last duplicate id") {
    TempDir dir;
    auto path = dir.file("dup.jsonl",
                         R"({"id":1,"lat":0,"lon":0,"tags":{"a":"1"}})"
                         "\n"
                         R"({"id":1,"lat":0,"lon":0,"tags":{"a":"2"}})"
                         "\n");
    auto result = load_osm(path);
    REQUIRE(result.nodes.size() == 1);
    CHECK(result.duplicates == 1);
    CHECK(result.nodes.at(1).tags.count(Tag("a", "2")) == 1);
}

TEST_CASE("load_kg groups triples by subject") {
    TempDir dir;
    IngestConfig cfg;
    cfg.type_predicate = "instanceOf";
    auto path = dir.file("kg.nt",
                         "<Q3375> <instanceOf> <mountain> .\n"
                         "<Q3375> <parentPeak> <Q15127> .\n");
    auto result = load_kg(path, cfg);
    REQUIRE(result.entities.count("Q3375") == 1);
    const auto& e = result.entities.at("Q3375");
    CHECK(e.classes == std::set<std::string>{"mountain"});
    CHECK(e.properties == std::set<std::string>{"parentPeak"});
}

TEST_CASE("load_kg with only type triples yields empty property sets") {
    TempDir dir;
    IngestConfig cfg;
    cfg.type_predicate = "instanceOf";
    auto result = load_kg(dir.file("kg.nt", "<Q1> <instanceOf> <city> .\n"), cfg);
    CHECK(result.entities.at("Q1").properties.empty());
    CHECK(result.entities.at("Q1").classes.size() == 1);
}

TEST_CASE("load_kg supports multiple classes per subject") {
    TempDir dir;
    IngestConfig cfg;
    cfg.type_predicate = "instanceOf";
    auto result = load_kg(dir.file("kg.nt",
                                   "<Q1> <instanceOf> <city> .\n"
                                   "<Q1> <instanceOf> <place> .\n"),
                          cfg);
    CHECK(result.entities.at("Q1").classes.size() == 2);
}

TEST_CASE("load_kg counts unparseable lines and literals contribute predicate only") {
    TempDir dir;
    IngestConfig cfg;
    auto result = load_kg(dir.file("kg.nt",
                                   "<Q1> <label> \"Zugspitze\"@de .\n"
                                   "garbage line\n"),
                          cfg);
    CHECK(result.rejected == 1);
    CHECK(result.entities.at("Q1").properties == std::set<std::string>{"label"});
}

TEST_CASE("triple line parser handles escapes and datatype suffixes") {
    auto t = parse_triple_line("<a> <p> \"x \\\"y\\\" z\"^^<string> .");
    REQUIRE(t.has_value());
    CHECK(t->object == "x \"y\" z");
    CHECK(t->object_kind == ObjectKind::Literal);
    CHECK_FALSE(parse_triple_line("<a> <p> <o>").has_value());   // missing dot
    CHECK_FALSE(parse_triple_line("<a> <p> bare .").has_value());
    CHECK_FALSE(parse_triple_line("# comment").has_value());
    CHECK_FALSE(parse_triple_line("<> <p> <o> .").has_value());  // empty subject
    CHECK_FALSE(parse_triple_line("<a> <> <o> .").has_value());
}

TEST_CASE("extract_links parses node ids from literals and IRI suffixes") {
    TempDir dir;
    IngestConfig cfg;
    cfg.same_as_predicate = "sameAs";
    auto path = dir.file("links.nt",
                         "<Q3375> <sameAs> \"27384190\" .\n"
                         "<Q5> <sameAs> <https://osm.example/node/42> .\n"
                         "<Q6> <sameAs> \"not-a-number\" .\n");
    auto result = extract_links(path, cfg);
    REQUIRE(result.links.size() == 2);
    CHECK(result.links[0] == LinkedEntity{27384190, "Q3375"});
    CHECK(result.links[1] == LinkedEntity{42, "Q5"});
    CHECK(result.rejected == 1);
}

TEST_CASE("extract_links with no identity triples yields empty list") {
    TempDir dir;
    IngestConfig cfg;
    auto result = extract_links(dir.file("links.nt", "<a> <other> <b> .\n"), cfg);
    CHECK(result.links.empty());
}

TEST_CASE("one entity may link to two nodes") {
    TempDir dir;
    IngestConfig cfg;
    cfg.same_as_predicate = "sameAs";
    auto result = extract_links(dir.file("links.nt",
                                         "<Q1> <sameAs> \"1\" .\n"
                                         "<Q1> <sameAs> \"2\" .\n"),
                                cfg);
    CHECK(result.links.size() == 2);
}

namespace {

// Small in-memory dataset builder used by the build_dataset cases.
struct Fixture {
    std::map<std::int64_t, OsmNode> nodes;
    std::map<std::string, KgEntity> entities;
    std::vector<LinkedEntity> links;

    void add(std::int64_t node_id, const std::string& iri,
             const std::set<std::string>& classes) {
        OsmNode n;
        n.id = node_id;
        nodes.emplace(node_id, n);
        KgEntity e;
        e.iri = iri;
        e.classes = classes;
        entities.emplace(iri, e);
        links.push_back({node_id, iri});
    }
};

}  // namespace

TEST_CASE("build_dataset retains classes with strictly more members than the bound") {
    Fixture fx;
    std::int64_t id = 1;
    for (int i = 0; i < 150; ++i) fx.add(id++, "eA" + std::to_string(i), {"A"});
    for (int i = 0; i < 101; ++i) fx.add(id++, "eB" + std::to_string(i), {"B"});
    for (int i = 0; i < 100; ++i) fx.add(id++, "eC" + std::to_string(i), {"C"});

    IngestConfig cfg;
    cfg.min_entities_per_class = 100;
    auto dataset = build_dataset(fx.nodes, fx.entities, fx.links, cfg);
    CHECK(dataset.classes == std::vector<std::string>{"A", "B"});

    // links to the dropped class are removed
    for (const auto& link : dataset.links) {
        const auto& classes = dataset.entities.at(link.entity_iri).classes;
        CHECK((classes.count("A") || classes.count("B")));
    }
}

TEST_CASE("build_dataset with min 0 keeps every class with a member") {
    Fixture fx;
    fx.add(1, "e1", {"A"});
    fx.add(2, "e2", {"B"});
    IngestConfig cfg;
    cfg.min_entities_per_class = 0;
    auto dataset = build_dataset(fx.nodes, fx.entities, fx.links, cfg);
    CHECK(dataset.classes == std::vector<std::string>{"A", "B"});
}

TEST_CASE("build_dataset drops links with missing endpoints") {
    Fixture fx;
    fx.add(1, "e1", {"A"});
    fx.links.push_back({999, "e1"});      // missing node
    fx.links.push_back({1, "missing"});   // missing entity
    IngestConfig cfg;
    cfg.min_entities_per_class = 0;
    DatasetStats stats;
    auto dataset = build_dataset(fx.nodes, fx.entities, fx.links, cfg, &stats);
    CHECK(dataset.links.size() == 1);
    CHECK(stats.links_dropped_missing_endpoint == 2);
}

TEST_CASE("build_dataset fails when nothing is retained") {
    Fixture fx;
    fx.add(1, "e1", {"A"});
    IngestConfig cfg;
    cfg.min_entities_per_class = 100;
    CHECK_THROWS_AS(build_dataset(fx.nodes, fx.entities, fx.links, cfg), ConfigError);
}

TEST_CASE("ingest config rejects a negative class bound") {
    Fixture fx;
    fx.add(1, "e1", {"A"});
    IngestConfig cfg;
    cfg.min_entities_per_class = -1;
    CHECK_THROWS_AS(build_dataset(fx.nodes, fx.entities, fx.links, cfg),
                    std::invalid_argument);
}

TEST_CASE("build_dataset geographic filter drops entities without coordinates") {
    Fixture fx;
    fx.add(1, "e1", {"A"});
    fx.add(2, "e2", {"A"});
    fx.entities.at("e1").properties.insert("geo:coord");
    IngestConfig cfg;
    cfg.min_entities_per_class = 0;
    cfg.coordinate_predicates = {"geo:coord"};
    DatasetStats stats;
    auto dataset = build_dataset(fx.nodes, fx.entities, fx.links, cfg, &stats);
    CHECK(dataset.entities.count("e2") == 0);
    CHECK(stats.entities_dropped_not_geographic == 1);
    CHECK(dataset.links.size() == 1);

    cfg.geographic_only = false;
    auto unfiltered = build_dataset(fx.nodes, fx.entities, fx.links, cfg);
    CHECK(unfiltered.entities.count("e2") == 1);
}

TEST_CASE("build_dataset is deterministic under input order") {
    Fixture fx;
    std::int64_t id = 1;
    for (int i = 0; i < 40; ++i) fx.add(id++, "x" + std::to_string(i), {"A", "C"});
    for (int i = 0; i < 30; ++i) fx.add(id++, "y" + std::to_string(i), {"B"});
    IngestConfig cfg;
    cfg.min_entities_per_class = 10;

    auto shuffled_links = fx.links;
    std::mt19937_64 rng(3);
    std::shuffle(shuffled_links.begin(), shuffled_links.end(), rng);

    auto a = build_dataset(fx.nodes, fx.entities, fx.links, cfg);
    auto b = build_dataset(fx.nodes, fx.entities, shuffled_links, cfg);
    CHECK(a.classes == b.classes);
    CHECK(std::set<LinkedEntity>(a.links.begin(), a.links.end()) ==
          std::set<LinkedEntity>(b.links.begin(), b.links.end()));

    // brute-force recount: every retained class exceeds the bound
    for (const auto& c : a.classes) {
        int count = 0;
        for (const auto& link : a.links)
            if (a.entities.at(link.entity_iri).classes.count(c)) ++count;
        CHECK(count > cfg.min_entities_per_class);
    }
}

TEST_CASE("reference alignment parsing") {
    TempDir dir;
    auto path = dir.file("gt.tsv", "natural=peak\tmountain\n");
    auto ref = load_reference_alignment(path);
    REQUIRE(ref.size() == 1);
    CHECK(ref.count({Tag("natural", "peak"), "mountain"}) == 1);

    CHECK(load_reference_alignment(dir.file("empty.tsv", "")).empty());

    auto dup = load_reference_alignment(
        dir.file("dup.tsv", "natural=peak\tmountain\nnatural=peak\tmountain\n"));
    CHECK(dup.size() == 1);

    CHECK_THROWS_AS(load_reference_alignment(dir.file("bad.tsv", "no-tab-here\n")), ConfigError);
}

TEST_CASE("dataset roundtrips through json") {
    Fixture fx;
    fx.add(1, "e1", {"A"});
    fx.add(2, "e2", {"A", "B"});
    fx.entities.at("e1").properties = {"p1", "p2"};
    fx.entities.at("e1").coordinate = {{47.0, 10.0}};
    fx.nodes.at(1).tags.insert(Tag("natural", "peak"));
    IngestConfig cfg;
    cfg.min_entities_per_class = 0;
    auto dataset = build_dataset(fx.nodes, fx.entities, fx.links, cfg);

    TempDir dir;
    auto path = dir / "dataset.json";
    save_dataset(dataset, path);
    auto loaded = load_dataset(path);
    CHECK(loaded.classes == dataset.classes);
    CHECK(loaded.links == dataset.links);
    CHECK(loaded.nodes.at(1).tags == dataset.nodes.at(1).tags);
    CHECK(loaded.entities.at("e1").properties == dataset.entities.at("e1").properties);
    REQUIRE(loaded.entities.at("e1").coordinate.has_value());
    CHECK(loaded.entities.at("e1").coordinate->first == 47.0);
}
