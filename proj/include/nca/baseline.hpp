#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <vector>

#include "nca/core.hpp"

namespace nca {

struct BaselineConfig {
    double threshold = 1.0;  // th_l: accept normalized distance strictly below
    bool normalize = true;   // lowercase and strip non-alphanumerics

    void validate() const {
        if (threshold < 0.0 || threshold > 1.0)
            throw std::invalid_argument("baseline threshold must be in [0,1]");
    }
};

// Unit-cost edit distance (insert, delete, substitute), two-row DP.
inline std::size_t levenshtein(const std::string& a, const std::string& b) {
    if (a.size() < b.size()) return levenshtein(b, a);
    std::vector<std::size_t> prev(b.size() + 1), curr(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        curr[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

// Distance scaled by the longer string; two empty strings are distance 0.
inline double normalized_levenshtein(const std::string& a, const std::string& b) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 0.0;
    return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

inline std::string normalize_name(const std::string& s) {
    std::string out;
    for (unsigned char c : s)
        if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
    return out;
}

// Local name of a class IRI: text after the last '/' or '#'.
inline std::string class_local_name(const std::string& iri) {
    auto pos = iri.find_last_of("/#");
    if (pos == std::string::npos || pos + 1 >= iri.size()) return iri;
    return iri.substr(pos + 1);
}

// Name-matching baseline: compares each tag against each class local name and
// keeps pairs with normalized distance strictly below the threshold. Both the
// full "key=value" string and the value alone are tried; the better distance
// wins, since class names usually resemble tag values.
inline std::set<AlignmentPair> lev_align(const std::vector<Tag>& tags,
                                         const std::vector<std::string>& classes,
                                         const BaselineConfig& cfg) {
    cfg.validate();
    auto prep = [&](const std::string& s) { return cfg.normalize ? normalize_name(s) : s; };

    std::set<AlignmentPair> pairs;
    for (const auto& tag : tags) {
        const std::string full = prep(canonical_tag_string(tag));
        const std::string value = prep(tag.value);
        for (const auto& class_iri : classes) {
            const std::string name = prep(class_local_name(class_iri));
            double d = normalized_levenshtein(full, name);
            if (!tag.value.empty()) d = std::min(d, normalized_levenshtein(value, name));
            if (d < cfg.threshold) pairs.insert({tag, class_iri, 1.0 - d});
        }
    }
    return pairs;
}

}  // namespace nca
