#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nca/core.hpp"
#include "nca/util.hpp"

namespace nca {

struct IngestConfig {
    std::string type_predicate = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    std::string same_as_predicate = "http://www.w3.org/2002/07/owl#sameAs";
    int min_entities_per_class = 100;  // strict ">" retention bound
    bool geographic_only = true;
    // The geographic filter only applies when at least one coordinate
    // predicate is configured.
    std::set<std::string> coordinate_predicates;

    void validate() const {
        if (min_entities_per_class < 0)
            throw std::invalid_argument("min_entities_per_class must be >= 0");
        if (type_predicate.empty() || same_as_predicate.empty())
            throw std::invalid_argument("type and identity predicates must be non-empty");
    }
};

struct Dataset {
    std::map<std::int64_t, OsmNode> nodes;
    std::map<std::string, KgEntity> entities;
    std::vector<LinkedEntity> links;
    std::vector<std::string> classes;  // retained, lexicographically sorted
};

struct OsmLoadResult {
    std::map<std::int64_t, OsmNode> nodes;
    std::size_t rejected = 0;
    std::size_t duplicates = 0;
};

// One JSON object per line: {"id":..., "lat":..., "lon":..., "tags":{...}}.
// Malformed lines are counted, not fatal, unless every line is malformed.
inline OsmLoadResult load_osm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open OSM corpus: " + path);

    OsmLoadResult result;
    std::string line;
    std::size_t total = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++total;
        try {
            auto j = nlohmann::json::parse(line);
            OsmNode node;
            node.id = j.at("id").get<std::int64_t>();
            node.lat = j.at("lat").get<double>();
            node.lon = j.at("lon").get<double>();
            if (node.lat < -90.0 || node.lat > 90.0 || node.lon < -180.0 || node.lon > 180.0)
                throw std::out_of_range("coordinates out of range");
            for (auto& [key, value] : j.at("tags").items())
                node.tags.insert(Tag(key, value.get<std::string>()));
            auto [it, inserted] = result.nodes.insert_or_assign(node.id, std::move(node));
            if (!inserted) ++result.duplicates;
        } catch (const std::exception&) {
            ++result.rejected;
        }
    }
    if (total > 0 && result.nodes.empty())
        throw ConfigError("no valid OSM node lines in " + path);
    if (result.duplicates > 0)
        log_warn(std::to_string(result.duplicates) + " duplicate node ids in " + path +
                 " (last occurrence kept)");
    return result;
}

// N-Triples-style line: `<s> <p> <o> .` or `<s> <p> "literal" .`. Literal
// suffixes (@lang, ^^<datatype>) are tolerated and discarded.
inline std::optional<Triple> parse_triple_line(const std::string& line) {
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    };
    auto read_iri = [&]() -> std::optional<std::string> {
        if (i >= line.size() || line[i] != '<') return std::nullopt;
        auto end = line.find('>', i + 1);
        if (end == std::string::npos) return std::nullopt;
        std::string iri = line.substr(i + 1, end - i - 1);
        i = end + 1;
        if (iri.empty()) return std::nullopt;
        return iri;
    };

    skip_ws();
    if (i >= line.size() || line[i] == '#') return std::nullopt;
    auto subject = read_iri();
    if (!subject) return std::nullopt;
    skip_ws();
    auto predicate = read_iri();
    if (!predicate) return std::nullopt;
    skip_ws();
    if (i >= line.size()) return std::nullopt;

    Triple t;
    t.subject = *subject;
    t.predicate = *predicate;
    if (line[i] == '<') {
        auto object = read_iri();
        if (!object) return std::nullopt;
        t.object = *object;
        t.object_kind = ObjectKind::Entity;
    } else if (line[i] == '"') {
        ++i;
        std::string literal;
        bool closed = false;
        while (i < line.size()) {
            char c = line[i++];
            if (c == '\\' && i < line.size()) {
                char e = line[i++];
                switch (e) {
                    case 'n': literal += '\n'; break;
                    case 't': literal += '\t'; break;
                    case '\\': literal += '\\'; break;
                    case '"': literal += '"'; break;
                    default: literal += e; break;
                }
            } else if (c == '"') {
                closed = true;
                break;
            } else {
                literal += c;
            }
        }
        if (!closed) return std::nullopt;
        t.object = literal;
        t.object_kind = ObjectKind::Literal;
        // skip @lang / ^^<datatype>
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '.') ++i;
    } else {
        return std::nullopt;
    }
    skip_ws();
    if (i >= line.size() || line[i] != '.') return std::nullopt;
    return t;
}

// Parses "lat,lon" or "lat lon" literals for the stored coordinate.
inline std::optional<std::pair<double, double>> parse_coordinate_literal(const std::string& s) {
    std::string tmp = s;
    std::replace(tmp.begin(), tmp.end(), ',', ' ');
    std::istringstream in(tmp);
    double lat = 0.0, lon = 0.0;
    if (!(in >> lat >> lon)) return std::nullopt;
    return std::make_pair(lat, lon);
}

struct KgLoadResult {
    std::map<std::string, KgEntity> entities;
    std::size_t rejected = 0;
};

inline KgLoadResult load_kg(const std::string& path, const IngestConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open KG triples: " + path);

    KgLoadResult result;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto triple = parse_triple_line(line);
        if (!triple) {
            ++result.rejected;
            continue;
        }
        auto& entity = result.entities[triple->subject];
        entity.iri = triple->subject;
        if (triple->predicate == cfg.type_predicate) {
            // The type predicate is the label source, never a feature.
            entity.classes.insert(triple->object);
        } else {
            entity.properties.insert(triple->predicate);
            if (cfg.coordinate_predicates.count(triple->predicate) &&
                triple->object_kind == ObjectKind::Literal && !entity.coordinate) {
                entity.coordinate = parse_coordinate_literal(triple->object);
            }
        }
    }
    return result;
}

// Node ids are encoded as the numeric suffix of an object IRI, or as a bare
// integer literal.
inline std::optional<std::int64_t> parse_node_id(const std::string& object, ObjectKind kind) {
    std::string digits;
    if (kind == ObjectKind::Literal) {
        digits = object;
    } else {
        auto end = object.find_last_not_of("0123456789");
        digits = (end == std::string::npos) ? object : object.substr(end + 1);
    }
    if (digits.empty()) return std::nullopt;
    for (char c : digits)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    try {
        return std::stoll(digits);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

struct LinkLoadResult {
    std::vector<LinkedEntity> links;
    std::size_t rejected = 0;
};

inline LinkLoadResult extract_links(const std::string& path, const IngestConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open link triples: " + path);

    LinkLoadResult result;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto triple = parse_triple_line(line);
        if (!triple || triple->predicate != cfg.same_as_predicate) continue;
        auto id = parse_node_id(triple->object, triple->object_kind);
        if (!id) {
            ++result.rejected;
            continue;
        }
        result.links.push_back({*id, triple->subject});
    }
    return result;
}

struct DatasetStats {
    std::size_t links_dropped_missing_endpoint = 0;
    std::size_t links_dropped_no_retained_class = 0;
    std::size_t entities_dropped_not_geographic = 0;
    std::size_t classes_before_filter = 0;
};

inline Dataset build_dataset(std::map<std::int64_t, OsmNode> nodes,
                             std::map<std::string, KgEntity> entities,
                             std::vector<LinkedEntity> links, const IngestConfig& cfg,
                             DatasetStats* stats_out = nullptr) {
    cfg.validate();
    DatasetStats stats;

    if (cfg.geographic_only && !cfg.coordinate_predicates.empty()) {
        for (auto it = entities.begin(); it != entities.end();) {
            bool has_coordinate = false;
            for (const auto& p : cfg.coordinate_predicates)
                if (it->second.properties.count(p)) has_coordinate = true;
            if (!has_coordinate) {
                it = entities.erase(it);
                ++stats.entities_dropped_not_geographic;
            } else {
                ++it;
            }
        }
    }

    std::vector<LinkedEntity> valid_links;
    for (const auto& link : links) {
        if (nodes.count(link.node_id) && entities.count(link.entity_iri))
            valid_links.push_back(link);
        else
            ++stats.links_dropped_missing_endpoint;
    }

    // Per-link class membership counts; a class is retained with strictly
    // more than min_entities_per_class members.
    std::map<std::string, int> class_counts;
    for (const auto& link : valid_links)
        for (const auto& c : entities.at(link.entity_iri).classes) ++class_counts[c];
    stats.classes_before_filter = class_counts.size();

    std::vector<std::string> retained;
    for (const auto& [c, count] : class_counts)
        if (count > cfg.min_entities_per_class) retained.push_back(c);
    std::sort(retained.begin(), retained.end());
    if (retained.empty())
        throw ConfigError("no classes retained: every class has <= " +
                          std::to_string(cfg.min_entities_per_class) + " linked entities");
    std::set<std::string> retained_set(retained.begin(), retained.end());

    std::vector<LinkedEntity> final_links;
    for (const auto& link : valid_links) {
        const auto& classes = entities.at(link.entity_iri).classes;
        bool any = std::any_of(classes.begin(), classes.end(),
                               [&](const std::string& c) { return retained_set.count(c) > 0; });
        if (any)
            final_links.push_back(link);
        else
            ++stats.links_dropped_no_retained_class;
    }

    if (stats_out) *stats_out = stats;
    return Dataset{std::move(nodes), std::move(entities), std::move(final_links),
                   std::move(retained)};
}

// --- serialization -----------------------------------------------------------

inline constexpr const char* kDatasetFormat = "nca-dataset";
inline constexpr int kDatasetVersion = 1;

inline nlohmann::json dataset_to_json(const Dataset& dataset) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& [id, node] : dataset.nodes) {
        nlohmann::json tags = nlohmann::json::object();
        for (const auto& tag : node.tags) tags[tag.key] = tag.value;
        nodes.push_back({{"id", id}, {"lat", node.lat}, {"lon", node.lon}, {"tags", tags}});
    }
    nlohmann::json entities = nlohmann::json::array();
    for (const auto& [iri, e] : dataset.entities) {
        nlohmann::json ej{{"iri", iri}, {"properties", e.properties}, {"classes", e.classes}};
        if (e.coordinate) ej["coordinate"] = {e.coordinate->first, e.coordinate->second};
        entities.push_back(std::move(ej));
    }
    nlohmann::json links = nlohmann::json::array();
    for (const auto& link : dataset.links) links.push_back({link.node_id, link.entity_iri});
    return nlohmann::json{{"format", kDatasetFormat}, {"version", kDatasetVersion},
                          {"nodes", nodes},           {"entities", entities},
                          {"links", links},           {"classes", dataset.classes}};
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j.at("format").get<std::string>() != kDatasetFormat)
        throw ConfigError("not a dataset file");
    if (j.at("version").get<int>() != kDatasetVersion)
        throw ConfigError("unsupported dataset version");
    Dataset dataset;
    for (const auto& nj : j.at("nodes")) {
        OsmNode node;
        node.id = nj.at("id").get<std::int64_t>();
        node.lat = nj.at("lat").get<double>();
        node.lon = nj.at("lon").get<double>();
        for (auto& [key, value] : nj.at("tags").items())
            node.tags.insert(Tag(key, value.get<std::string>()));
        dataset.nodes.emplace(node.id, std::move(node));
    }
    for (const auto& ej : j.at("entities")) {
        KgEntity e;
        e.iri = ej.at("iri").get<std::string>();
        e.properties = ej.at("properties").get<std::set<std::string>>();
        e.classes = ej.at("classes").get<std::set<std::string>>();
        if (ej.contains("coordinate"))
            e.coordinate = std::make_pair(ej.at("coordinate").at(0).get<double>(),
                                          ej.at("coordinate").at(1).get<double>());
        dataset.entities.emplace(e.iri, std::move(e));
    }
    for (const auto& lj : j.at("links"))
        dataset.links.push_back({lj.at(0).get<std::int64_t>(), lj.at(1).get<std::string>()});
    dataset.classes = j.at("classes").get<std::vector<std::string>>();
    return dataset;
}

inline void save_dataset(const Dataset& dataset, const std::string& path) {
    write_file(path, dataset_to_json(dataset).dump() + "\n");
}

inline Dataset load_dataset(const std::string& path) {
    try {
        return dataset_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("corrupt dataset file " + path + ": " + e.what());
    }
}

// TSV `tag<TAB>class_iri`; ground truth must be clean, so malformed rows are
// fatal rather than counted.
inline std::set<std::pair<Tag, std::string>> load_reference_alignment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open reference alignment: " + path);

    std::set<std::pair<Tag, std::string>> reference;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
            throw ConfigError("malformed reference alignment row at " + path + ":" +
                              std::to_string(lineno));
        try {
            reference.emplace(parse_tag(line.substr(0, tab)), line.substr(tab + 1));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("malformed reference alignment row at " + path + ":" +
                              std::to_string(lineno) + ": " + e.what());
        }
    }
    return reference;
}

}  // namespace nca
