#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>

#include "nca/util.hpp"

namespace nca {

// An OSM key-value pair. Canonical textual form is "key=value", or the bare
// key when the value is empty. Keys never contain '='.
struct Tag {
    std::string key;
    std::string value;

    Tag() = default;
    Tag(std::string k, std::string v) : key(std::move(k)), value(std::move(v)) {
        if (key.empty()) throw std::invalid_argument("tag key must be non-empty");
        if (key.find('=') != std::string::npos)
            throw std::invalid_argument("tag key must not contain '=': " + key);
    }

    friend bool operator==(const Tag& a, const Tag& b) {
        return a.key == b.key && a.value == b.value;
    }
    friend auto operator<=>(const Tag& a, const Tag& b) {
        return std::tie(a.key, a.value) <=> std::tie(b.key, b.value);
    }
};

inline std::string canonical_tag_string(const Tag& tag) {
    if (tag.value.empty()) return tag.key;
    return tag.key + "=" + tag.value;
}

// Splits on the first '=', so values may themselves contain '='.
inline Tag parse_tag(const std::string& canonical) {
    auto pos = canonical.find('=');
    if (pos == std::string::npos) return Tag(canonical, "");
    return Tag(canonical.substr(0, pos), canonical.substr(pos + 1));
}

struct OsmNode {
    std::int64_t id = 0;
    double lat = 0.0;  // degrees, [-90, 90]; stored only, never a feature
    double lon = 0.0;  // degrees, [-180, 180]
    std::set<Tag> tags;

    friend bool operator==(const OsmNode& a, const OsmNode& b) {
        return a.id == b.id && a.lat == b.lat && a.lon == b.lon && a.tags == b.tags;
    }
};

enum class ObjectKind { Entity, Literal };

struct Triple {
    std::string subject;    // IRI
    std::string predicate;  // IRI
    std::string object;     // IRI or literal text
    ObjectKind object_kind = ObjectKind::Entity;
};

struct KgEntity {
    std::string iri;
    std::set<std::string> properties;  // predicate IRIs; never the type predicate
    std::set<std::string> classes;     // class IRIs reached via the type predicate
    std::optional<std::pair<double, double>> coordinate;  // (lat, lon), stored only
};

struct LinkedEntity {
    std::int64_t node_id = 0;
    std::string entity_iri;

    friend bool operator==(const LinkedEntity&, const LinkedEntity&) = default;
    friend auto operator<=>(const LinkedEntity& a, const LinkedEntity& b) {
        return std::tie(a.node_id, a.entity_iri) <=> std::tie(b.node_id, b.entity_iri);
    }
};

struct AlignmentPair {
    Tag tag;
    std::string class_iri;
    double confidence = 0.0;  // in [0,1]

    friend bool operator==(const AlignmentPair& a, const AlignmentPair& b) {
        return a.tag == b.tag && a.class_iri == b.class_iri;
    }
    friend auto operator<=>(const AlignmentPair& a, const AlignmentPair& b) {
        return std::tie(a.tag, a.class_iri) <=> std::tie(b.tag, b.class_iri);
    }
};

}  // namespace nca
