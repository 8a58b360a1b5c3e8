#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "nca/core.hpp"
#include "nca/util.hpp"

namespace nca {

// Generator for desk-scale end-to-end fixtures: tag t_i co-occurs with class
// c_i; a noise fraction of nodes carries one distractor tag borrowed from a
// different class; KG entities carry clean class-indicative properties.
// Tag and property bundles vary per node/entity so that neither source
// collapses to one input vector per class.
// distractor: noisy nodes gain a second class tag from another class.
// swap: noisy nodes lose their own class tag and show another class's tag
// instead, so the corpus-side signal is genuinely corrupted.
enum class NoiseMode { Distractor, Swap };

struct SynthConfig {
    int classes = 10;          // k >= 2
    int nodes_per_class = 200; // m
    double noise = 0.1;        // p, fraction of nodes with a noisy tag set
    NoiseMode noise_mode = NoiseMode::Distractor;
    std::uint64_t seed = 42;

    void validate() const {
        if (classes < 2) throw std::invalid_argument("synth: --classes must be >= 2");
        if (nodes_per_class < 1)
            throw std::invalid_argument("synth: --nodes-per-class must be >= 1");
        if (noise < 0.0 || noise > 1.0)
            throw std::invalid_argument("synth: --noise must be in [0,1]");
    }
};

struct SynthFixture {
    std::string osm_jsonl;
    std::string kg_triples;
    std::string link_triples;
    std::string ground_truth_tsv;
    std::string tags_txt;   // the k class tags, one canonical tag per line
    std::vector<Tag> class_tags;
    std::vector<std::string> class_iris;
};

namespace detail {

inline std::string synth_class_iri(int i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "http://example.org/class/C%03d", i);
    return buf;
}

inline Tag synth_class_tag(int i) {
    char key[16], value[16];
    std::snprintf(key, sizeof key, "cat%03d", i);
    std::snprintf(value, sizeof value, "kind%03d", i);
    return Tag(key, value);
}

inline std::string synth_prop_iri(int class_index, int p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "http://example.org/prop/P%03d_%d", class_index, p);
    return buf;
}

inline Tag synth_aux_tag(int class_index) {
    char key[16];
    std::snprintf(key, sizeof key, "feat%03d", class_index);
    return Tag(key, "yes");
}

}  // namespace detail

inline constexpr int kSynthPropsPerClass = 3;

inline SynthFixture generate_fixture(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);

    SynthFixture fx;
    for (int i = 0; i < cfg.classes; ++i) {
        fx.class_iris.push_back(detail::synth_class_iri(i));
        fx.class_tags.push_back(detail::synth_class_tag(i));
        fx.ground_truth_tsv +=
            canonical_tag_string(fx.class_tags.back()) + "\t" + fx.class_iris.back() + "\n";
        fx.tags_txt += canonical_tag_string(fx.class_tags.back()) + "\n";
    }

    const std::string type_pred = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    const std::string same_as = "http://www.w3.org/2002/07/owl#sameAs";
    const std::string label_prop = "http://example.org/prop/label";
    const std::string coord_prop = "http://example.org/prop/coordinate";
    const std::string common0 = "http://example.org/prop/common0";
    const std::string common1 = "http://example.org/prop/common1";

    std::int64_t next_id = 1000001;
    for (int i = 0; i < cfg.classes; ++i) {
        for (int j = 0; j < cfg.nodes_per_class; ++j) {
            const std::int64_t id = next_id++;
            const double lat = -90.0 + 180.0 * u64_to_unit(rng());
            const double lon = -180.0 + 360.0 * u64_to_unit(rng());

            nlohmann::json tags;
            tags["name"] = "Node " + std::to_string(id);
            const Tag aux = detail::synth_aux_tag(i);
            if (u64_to_unit(rng()) < 0.5) tags[aux.key] = aux.value;
            int shown_class = i;
            bool add_distractor = false;
            if (u64_to_unit(rng()) < cfg.noise) {
                int other = static_cast<int>(rng() % (cfg.classes - 1));
                if (other >= i) ++other;
                if (cfg.noise_mode == NoiseMode::Swap)
                    shown_class = other;
                else
                    add_distractor = true;
                if (add_distractor)
                    tags[fx.class_tags[other].key] = fx.class_tags[other].value;
            }
            tags[fx.class_tags[shown_class].key] = fx.class_tags[shown_class].value;
            nlohmann::json node{{"id", id}, {"lat", lat}, {"lon", lon}, {"tags", tags}};
            fx.osm_jsonl += node.dump() + "\n";

            char entity[64];
            std::snprintf(entity, sizeof entity, "http://example.org/entity/E%08lld",
                          static_cast<long long>(id));
            auto triple = [&](const std::string& p, const std::string& o, bool literal) {
                fx.kg_triples += std::string("<") + entity + "> <" + p + "> " +
                                 (literal ? "\"" + o + "\"" : "<" + o + ">") + " .\n";
            };
            triple(type_pred, fx.class_iris[i], false);
            // indicative bundle varies per entity; at least one survives
            bool any_indicative = false;
            for (int p = 0; p < kSynthPropsPerClass; ++p)
                if (u64_to_unit(rng()) < 0.8) {
                    triple(detail::synth_prop_iri(i, p), "1", true);
                    any_indicative = true;
                }
            if (!any_indicative) triple(detail::synth_prop_iri(i, 0), "1", true);
            if (u64_to_unit(rng()) < 0.6) triple(common0, "1", true);
            if (u64_to_unit(rng()) < 0.6) triple(common1, "1", true);
            triple(label_prop, "Entity " + std::to_string(id), true);
            {
                char coord[48];
                std::snprintf(coord, sizeof coord, "%.5f,%.5f", lat, lon);
                triple(coord_prop, coord, true);
            }
            fx.link_triples += std::string("<") + entity + "> <" + same_as + "> \"" +
                               std::to_string(id) + "\" .\n";
        }
    }
    return fx;
}

struct SynthPaths {
    std::string osm, kg, links, ground_truth, tags;
};

inline SynthPaths write_fixture(const SynthFixture& fx, const std::string& dir) {
    std::filesystem::create_directories(dir);
    SynthPaths paths{dir + "/osm.jsonl", dir + "/kg.nt", dir + "/links.nt",
                     dir + "/ground_truth.tsv", dir + "/tags.txt"};
    write_file(paths.osm, fx.osm_jsonl);
    write_file(paths.kg, fx.kg_triples);
    write_file(paths.links, fx.link_triples);
    write_file(paths.ground_truth, fx.ground_truth_tsv);
    write_file(paths.tags, fx.tags_txt);
    return paths;
}

}  // namespace nca
