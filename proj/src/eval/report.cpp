#include "scenegen/eval/report.hpp"

#include <iomanip>
#include <sstream>

namespace scenegen {

nlohmann::json AggregateMetrics::to_json() const {
    return {{"cd_s", cd_s},           {"fscore_s", fscore_s},
            {"cd_o", cd_o},           {"fscore_o", fscore_o},
            {"iou_b", iou_b},         {"collision_iou", collision_iou},
            {"runtime_sec", runtime_sec}};
}

AggregateMetrics aggregate(const std::vector<MetricReport>& reports) {
    SG_CHECK(!reports.empty(), "aggregate: no reports to average");
    AggregateMetrics a;
    for (const MetricReport& r : reports) {
        a.cd_s += r.cd_s;
        a.fscore_s += r.fscore_s;
        a.cd_o += r.cd_o_mean();
        a.fscore_o += r.fscore_o_mean();
        a.iou_b += r.iou_b_mean();
        a.collision_iou += r.collision_iou;
        a.runtime_sec += r.runtime_sec;
    }
    const real inv = 1 / static_cast<real>(reports.size());
    a.cd_s *= inv;
    a.fscore_s *= inv;
    a.cd_o *= inv;
    a.fscore_o *= inv;
    a.iou_b *= inv;
    a.collision_iou *= inv;
    a.runtime_sec *= inv;
    return a;
}

nlohmann::json summary_json(const std::vector<MetricReport>& reports) {
    nlohmann::json scenes = nlohmann::json::array();
    for (const MetricReport& r : reports) scenes.push_back(r.to_json());
    return {{"scenes", scenes}, {"aggregate", aggregate(reports).to_json()}};
}

namespace {

void csv_row(std::ostream& os, const std::string& label, real cd_s, real fs, real cd_o,
             real fo, real iou, real coll, real rt) {
    os << label << "," << cd_s << "," << fs << "," << cd_o << "," << fo << "," << iou << ","
       << coll << "," << rt << "\n";
}

}  // namespace

std::string summary_csv(const std::vector<MetricReport>& reports) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "scene,cd_s,fscore_s,cd_o,fscore_o,iou_b,collision_iou,runtime_sec\n";
    for (size_t i = 0; i < reports.size(); ++i) {
        const MetricReport& r = reports[i];
        csv_row(os, std::to_string(i), r.cd_s, r.fscore_s, r.cd_o_mean(), r.fscore_o_mean(),
                r.iou_b_mean(), r.collision_iou, r.runtime_sec);
    }
    const AggregateMetrics a = aggregate(reports);
    csv_row(os, "mean", a.cd_s, a.fscore_s, a.cd_o, a.fscore_o, a.iou_b, a.collision_iou,
            a.runtime_sec);
    return os.str();
}

std::string summary_markdown(
    const std::vector<std::pair<std::string, AggregateMetrics>>& rows) {
    std::ostringstream os;
    os << "| variant | cd_s | fscore_s | cd_o | fscore_o | iou_b | collision_iou |\n";
    os << "|---|---|---|---|---|---|---|\n";
    os << std::fixed << std::setprecision(4);
    for (const auto& [label, a] : rows) {
        os << "| " << label << " | " << a.cd_s << " | " << a.fscore_s << " | " << a.cd_o
           << " | " << a.fscore_o << " | " << a.iou_b << " | " << a.collision_iou << " |\n";
    }
    return os.str();
}

}  // namespace scenegen
