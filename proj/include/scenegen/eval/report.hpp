#pragma once

#include "scenegen/eval/metrics.hpp"

namespace scenegen {

// Corpus-level averages of the per-scene reports.
struct AggregateMetrics {
    real cd_s = 0;
    real fscore_s = 0;
    real cd_o = 0;
    real fscore_o = 0;
    real iou_b = 0;
    real collision_iou = 0;
    real runtime_sec = 0;

    nlohmann::json to_json() const;
};

AggregateMetrics aggregate(const std::vector<MetricReport>& reports);

// Per-scene rows plus the aggregate, as machine-readable JSON.
nlohmann::json summary_json(const std::vector<MetricReport>& reports);

// One CSV row per scene plus a trailing "mean" row.
std::string summary_csv(const std::vector<MetricReport>& reports);

// Markdown table with one row per labelled variant (benchmark-table shape).
std::string summary_markdown(
    const std::vector<std::pair<std::string, AggregateMetrics>>& rows);

}  // namespace scenegen
