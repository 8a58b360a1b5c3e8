#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nca/core.hpp"
#include "nca/ingest.hpp"
#include "nca/util.hpp"

namespace nca {

struct FeatureConfig {
    int min_tag_occurrences = 50;
    std::optional<std::set<std::string>> tag_allowlist;  // canonical tag strings
    int top_k_properties = 25;
    int min_value_frequency = 50;

    void validate() const {
        if (top_k_properties < 1)
            throw std::invalid_argument("top_k_properties must be >= 1");
        if (min_tag_occurrences < 0 || min_value_frequency < 0)
            throw std::invalid_argument("occurrence thresholds must be >= 0");
    }
};

// Ordered dimension dictionaries. Indices are contiguous from 0 and assigned
// in lexicographic order, so the layout is deterministic for a given dataset.
struct FeatureSpace {
    std::map<std::string, std::size_t> osm_dims;  // canonical tag or bare key -> index
    std::map<std::string, std::size_t> kg_dims;   // property IRI -> index
    std::map<std::string, std::size_t> class_index;

    std::size_t osm_size() const { return osm_dims.size(); }
    std::size_t kg_size() const { return kg_dims.size(); }
    std::size_t class_count() const { return class_index.size(); }

    friend bool operator==(const FeatureSpace&, const FeatureSpace&) = default;
};

// weight(p,c) = n_pc * ln(N / c_p). Natural log; any base gives the same
// within-class ranking, so top-k selection is base-invariant.
inline double property_weight(long long n_pc, long long num_classes,
                              long long classes_with_property) {
    if (num_classes < 1) throw std::invalid_argument("property_weight: N must be >= 1");
    if (classes_with_property < 1 || classes_with_property > num_classes)
        throw std::invalid_argument("property_weight: c_p must satisfy 1 <= c_p <= N");
    if (n_pc < 0) throw std::invalid_argument("property_weight: n_pc must be >= 0");
    return static_cast<double>(n_pc) *
           std::log(static_cast<double>(num_classes) / static_cast<double>(classes_with_property));
}

namespace detail {

// (entity, property) pairs counted once per entity per retained class.
struct PropertyCounts {
    std::map<std::string, std::map<std::string, long long>> per_class;  // class -> prop -> n_pc
    std::map<std::string, long long> classes_with_property;             // prop -> c_p
};

inline PropertyCounts count_properties(const Dataset& dataset) {
    PropertyCounts counts;
    std::set<std::string> retained(dataset.classes.begin(), dataset.classes.end());
    for (const auto& [iri, entity] : dataset.entities) {
        for (const auto& c : entity.classes) {
            if (!retained.count(c)) continue;
            for (const auto& p : entity.properties) ++counts.per_class[c][p];
        }
    }
    for (const auto& [c, props] : counts.per_class)
        for (const auto& [p, n] : props)
            if (n > 0) ++counts.classes_with_property[p];
    return counts;
}

}  // namespace detail

// Per retained class, ranks that class's properties by weight (descending,
// ties broken lexicographically) and keeps the top k; dimensions are the
// union across classes.
inline std::map<std::string, std::size_t> select_kg_dims(const Dataset& dataset,
                                                         const FeatureConfig& cfg) {
    cfg.validate();
    auto counts = detail::count_properties(dataset);
    const auto num_classes = static_cast<long long>(dataset.classes.size());

    std::set<std::string> selected;
    for (const auto& c : dataset.classes) {
        auto it = counts.per_class.find(c);
        if (it == counts.per_class.end()) continue;
        std::vector<std::pair<double, std::string>> ranked;
        for (const auto& [p, n_pc] : it->second) {
            if (n_pc <= 0) continue;
            double w = property_weight(n_pc, num_classes, counts.classes_with_property.at(p));
            ranked.emplace_back(w, p);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const auto k = std::min<std::size_t>(ranked.size(), cfg.top_k_properties);
        for (std::size_t i = 0; i < k; ++i) selected.insert(ranked[i].second);
    }

    std::map<std::string, std::size_t> dims;
    for (const auto& p : selected) dims.emplace(p, dims.size());
    return dims;
}

// A tag "k=v" qualifies when it is frequent enough, its value is frequent
// under that key, and it passes the allowlist when one is configured. Every
// sufficiently frequent key qualifies as a key dimension regardless; a node
// carrying tag k=v sets both dimensions.
inline std::map<std::string, std::size_t> select_osm_dims(const Dataset& dataset,
                                                          const FeatureConfig& cfg) {
    cfg.validate();
    std::map<std::string, long long> tag_counts;
    std::map<std::string, long long> key_counts;
    for (const auto& [id, node] : dataset.nodes) {
        std::set<std::string> node_keys;
        for (const auto& tag : node.tags) {
            ++tag_counts[canonical_tag_string(tag)];
            node_keys.insert(tag.key);
        }
        for (const auto& k : node_keys) ++key_counts[k];
    }

    std::set<std::string> selected;
    for (const auto& [canonical, count] : tag_counts) {
        Tag tag = parse_tag(canonical);
        if (tag.value.empty()) continue;  // value-less tags are covered by key dims
        if (count < cfg.min_tag_occurrences) continue;
        if (count < cfg.min_value_frequency) continue;
        if (cfg.tag_allowlist && !cfg.tag_allowlist->count(canonical)) continue;
        selected.insert(canonical);
    }
    for (const auto& [key, count] : key_counts)
        if (count >= cfg.min_tag_occurrences) selected.insert(key);

    if (selected.empty())
        throw ConfigError("empty OSM feature space: no tag or key meets the thresholds");

    std::map<std::string, std::size_t> dims;
    for (const auto& d : selected) dims.emplace(d, dims.size());
    return dims;
}

inline FeatureSpace build_feature_space(const Dataset& dataset, const FeatureConfig& cfg) {
    FeatureSpace space;
    space.osm_dims = select_osm_dims(dataset, cfg);
    space.kg_dims = select_kg_dims(dataset, cfg);
    for (const auto& c : dataset.classes) space.class_index.emplace(c, space.class_index.size());
    return space;
}

inline std::vector<double> encode_osm(const OsmNode& node, const FeatureSpace& space) {
    std::vector<double> vec(space.osm_size(), 0.0);
    for (const auto& tag : node.tags) {
        if (auto it = space.osm_dims.find(canonical_tag_string(tag)); it != space.osm_dims.end())
            vec[it->second] = 1.0;
        if (auto it = space.osm_dims.find(tag.key); it != space.osm_dims.end())
            vec[it->second] = 1.0;
    }
    return vec;
}

inline std::vector<double> encode_kg(const KgEntity& entity, const FeatureSpace& space) {
    std::vector<double> vec(space.kg_size(), 0.0);
    for (const auto& p : entity.properties)
        if (auto it = space.kg_dims.find(p); it != space.kg_dims.end()) vec[it->second] = 1.0;
    return vec;
}

// Multi-hot class labels; classes outside the retained set are ignored. An
// all-zero result means the example must be excluded from training.
inline std::vector<double> encode_labels(const std::set<std::string>& classes,
                                         const FeatureSpace& space) {
    std::vector<double> vec(space.class_count(), 0.0);
    for (const auto& c : classes)
        if (auto it = space.class_index.find(c); it != space.class_index.end())
            vec[it->second] = 1.0;
    return vec;
}

inline bool all_zero(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

// --- serialization -----------------------------------------------------------

inline constexpr int kFeatureSpaceVersion = 1;

inline nlohmann::json feature_space_to_json(const FeatureSpace& space) {
    auto in_index_order = [](const std::map<std::string, std::size_t>& dims) {
        std::vector<std::string> names(dims.size());
        for (const auto& [name, idx] : dims) names[idx] = name;
        return names;
    };
    return nlohmann::json{{"version", kFeatureSpaceVersion},
                          {"osm_dims", in_index_order(space.osm_dims)},
                          {"kg_dims", in_index_order(space.kg_dims)},
                          {"classes", in_index_order(space.class_index)}};
}

inline FeatureSpace feature_space_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != kFeatureSpaceVersion)
        throw ConfigError("unsupported feature space version");
    FeatureSpace space;
    auto load = [](const nlohmann::json& names, std::map<std::string, std::size_t>& dims) {
        std::size_t idx = 0;
        for (const auto& name : names) dims.emplace(name.get<std::string>(), idx++);
    };
    load(j.at("osm_dims"), space.osm_dims);
    load(j.at("kg_dims"), space.kg_dims);
    load(j.at("classes"), space.class_index);
    return space;
}

}  // namespace nca
