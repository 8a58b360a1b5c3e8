#pragma once

#include <algorithm>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "nca/core.hpp"
#include "nca/model.hpp"

namespace nca {

struct ProbeResult {
    Tag tag;
    std::vector<double> activations;  // class-layer logits, pre-sigmoid
    std::vector<double> confidences;  // sigmoid(activations)
};

struct UnknownTagError : std::runtime_error {
    explicit UnknownTagError(const Tag& tag)
        : std::runtime_error("tag not in feature space: " + canonical_tag_string(tag)) {}
};

// Feeds a one-hot OSM vector through the model: the tag's own dimension when
// present, otherwise its key dimension.
inline ProbeResult probe_tag(const NcaModel& model, const Tag& tag) {
    const auto& dims = model.feature_space.osm_dims;
    std::vector<double> input(model.feature_space.osm_size(), 0.0);
    if (auto it = dims.find(canonical_tag_string(tag)); it != dims.end()) {
        input[it->second] = 1.0;
    } else if (auto kit = dims.find(tag.key); kit != dims.end()) {
        input[kit->second] = 1.0;
    } else {
        throw UnknownTagError(tag);
    }
    ForwardPass f = forward(model, Source::Osm, input);
    return ProbeResult{tag, std::move(f.logits), std::move(f.probs)};
}

struct AlignmentResult {
    std::set<AlignmentPair> pairs;
    std::vector<Tag> unknown_tags;  // skipped with a warning, not fatal
};

// Algorithm: probe each tag and emit every class whose confidence exceeds the
// threshold. A tag may contribute zero, one, or many pairs.
inline AlignmentResult extract_alignment(const NcaModel& model, const std::vector<Tag>& tags,
                                         double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("alignment threshold must be in [0,1]");

    std::vector<std::string> classes(model.feature_space.class_count());
    for (const auto& [iri, idx] : model.feature_space.class_index) classes[idx] = iri;

    AlignmentResult result;
    for (const auto& tag : tags) {
        ProbeResult probe;
        try {
            probe = probe_tag(model, tag);
        } catch (const UnknownTagError&) {
            result.unknown_tags.push_back(tag);
            continue;
        }
        for (std::size_t j = 0; j < probe.confidences.size(); ++j)
            if (probe.confidences[j] > threshold)
                result.pairs.insert({tag, classes[j], probe.confidences[j]});
    }
    if (!result.unknown_tags.empty()) {
        std::string names;
        for (const auto& t : result.unknown_tags) {
            if (!names.empty()) names += ", ";
            names += canonical_tag_string(t);
        }
        log_warn("skipped " + std::to_string(result.unknown_tags.size()) +
                 " tags not in the feature space: " + names);
    }
    return result;
}

// TSV `tag<TAB>class<TAB>confidence`, sorted by (tag, descending confidence),
// confidence with 6 decimals.
inline std::string alignment_to_tsv(const std::set<AlignmentPair>& pairs) {
    std::vector<AlignmentPair> rows(pairs.begin(), pairs.end());
    std::sort(rows.begin(), rows.end(), [](const AlignmentPair& a, const AlignmentPair& b) {
        auto ka = canonical_tag_string(a.tag);
        auto kb = canonical_tag_string(b.tag);
        if (ka != kb) return ka < kb;
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.class_iri < b.class_iri;
    });
    std::string out;
    char buf[32];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%.6f", row.confidence);
        out += canonical_tag_string(row.tag) + "\t" + row.class_iri + "\t" + buf + "\n";
    }
    return out;
}

inline std::set<AlignmentPair> alignment_from_tsv(const std::string& content,
                                                  const std::string& origin = "<tsv>") {
    std::set<AlignmentPair> pairs;
    std::size_t lineno = 0;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw ConfigError("malformed alignment row at " + origin + ":" +
                              std::to_string(lineno));
        try {
            AlignmentPair pair;
            pair.tag = parse_tag(line.substr(0, t1));
            pair.class_iri = line.substr(t1 + 1, t2 - t1 - 1);
            pair.confidence = std::stod(line.substr(t2 + 1));
            pairs.insert(pair);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("malformed alignment row at " + origin + ":" +
                              std::to_string(lineno) + ": " + e.what());
        }
    }
    return pairs;
}

// Default thresholds chosen per KG profile; always overridable.
inline double default_threshold_for_profile(const std::string& profile) {
    if (profile == "wikidata") return 0.25;
    if (profile == "dbpedia") return 0.4;
    throw std::invalid_argument("unknown KG profile: " + profile +
                                " (expected wikidata or dbpedia)");
}

}  // namespace nca
