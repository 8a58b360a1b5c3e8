#pragma once

#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nca/core.hpp"
#include "nca/util.hpp"

namespace nca {

struct Metrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline double safe_ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Pairs match on (canonical tag, class) identity; confidences are ignored.
// Degenerate 0/0 ratios are defined as 0.
inline Metrics score(const std::set<AlignmentPair>& predicted,
                     const std::set<std::pair<Tag, std::string>>& reference) {
    Metrics m;
    for (const auto& pair : predicted) {
        if (reference.count({pair.tag, pair.class_iri}))
            ++m.tp;
        else
            ++m.fp;
    }
    m.fn = reference.size() - m.tp;
    m.precision = safe_ratio(m.tp, m.tp + m.fp);
    m.recall = safe_ratio(m.tp, m.tp + m.fn);
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

struct SweepRow {
    double threshold = 0.0;
    Metrics metrics;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double best_threshold = 0.0;
    Metrics best;  // highest F1; earliest threshold wins ties
};

// Shared tuner for the model and the baseline: the producer maps a threshold
// to a predicted alignment. When the producer thresholds on confidence, recall
// is antitone in the threshold; pass check_recall_antitone to verify it.
inline SweepResult sweep(const std::function<std::set<AlignmentPair>(double)>& produce,
                         const std::set<std::pair<Tag, std::string>>& reference,
                         const std::vector<double>& thresholds,
                         bool check_recall_antitone = false) {
    if (thresholds.empty()) throw std::invalid_argument("sweep: empty threshold list");

    SweepResult result;
    double prev_recall = 1.0;
    bool first = true;
    for (double t : thresholds) {
        Metrics m = score(produce(t), reference);
        if (check_recall_antitone && !first && m.recall > prev_recall + 1e-12)
            throw std::runtime_error("sweep: recall increased across ascending thresholds");
        prev_recall = m.recall;
        first = false;
        result.rows.push_back({t, m});
        if (result.rows.size() == 1 || m.f1 > result.best.f1) {
            result.best = m;
            result.best_threshold = t;
        }
    }
    return result;
}

inline std::vector<double> threshold_grid(double step) {
    if (step <= 0.0 || step > 1.0) throw std::invalid_argument("sweep step must be in (0,1]");
    std::vector<double> grid;
    for (double t = 0.0; t < 1.0 + step / 2; t += step) grid.push_back(std::min(t, 1.0));
    return grid;
}

inline std::string sweep_to_tsv(const SweepResult& result) {
    std::string out = "threshold\tprecision\trecall\tf1\n";
    char buf[96];
    for (const auto& row : result.rows) {
        std::snprintf(buf, sizeof buf, "%.2f\t%.6f\t%.6f\t%.6f\n", row.threshold,
                      row.metrics.precision, row.metrics.recall, row.metrics.f1);
        out += buf;
    }
    return out;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
    return nlohmann::json{{"tp", m.tp},
                          {"fp", m.fp},
                          {"fn", m.fn},
                          {"precision", m.precision},
                          {"recall", m.recall},
                          {"f1", m.f1}};
}

}  // namespace nca
