#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cclkit/errors.hpp"
#include "cclkit/scoring.hpp"
#include "cclkit/vqa_data.hpp"

namespace cclkit {

/// Mean absolute deviation around the cluster mean: (1/N) sum |x_i - mu|.
inline double cluster_mad(std::span<const double> scores) {
    if (scores.empty()) throw ValidationError("cluster_mad: empty score list");
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double dev = 0.0;
    for (double s : scores) dev += std::abs(s - mean);
    return dev / static_cast<double>(scores.size());
}

/// Coefficient of variation (sigma/mu)*100 with population sigma.
/// Undefined (nullopt) when the mean is zero.
inline std::optional<double> cluster_cv(std::span<const double> scores) {
    if (scores.empty()) throw ValidationError("cluster_cv: empty score list");
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    if (mean == 0.0) return std::nullopt;
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size());
    return std::sqrt(var) / mean * 100.0;
}

struct ClusterScore {
    std::string cluster_id;
    std::vector<double> scores; // member order
    double mean = 0.0;
    double mad = 0.0;
    std::optional<double> cv_percent; // undefined when mean == 0
};

inline ClusterScore make_cluster_score(std::string cluster_id, std::vector<double> scores) {
    if (scores.empty()) throw ValidationError("cluster score for \"" + cluster_id + "\": empty score list");
    ClusterScore cs;
    cs.cluster_id = std::move(cluster_id);
    cs.mean = 0.0;
    for (double s : scores) cs.mean += s;
    cs.mean /= static_cast<double>(scores.size());
    cs.mad = cluster_mad(scores);
    cs.cv_percent = cluster_cv(scores);
    cs.scores = std::move(scores);
    return cs;
}

/// Groups member scores by cluster, scores ordered by the cluster's member
/// order. Clusters with no scored member are omitted.
inline std::vector<ClusterScore> collect_cluster_scores(std::span<const QuestionCluster> clusters,
                                                        std::span<const MemberScore> member_scores) {
    std::map<std::pair<std::string_view, PerturbationLevel>, double> by_key;
    for (const auto& ms : member_scores) by_key[{ms.cluster_id, ms.level}] = ms.score;

    std::vector<ClusterScore> out;
    for (const auto& cluster : clusters) {
        std::vector<double> scores;
        for (const auto& member : cluster.members) {
            auto it = by_key.find({cluster.cluster_id, member.level});
            if (it != by_key.end()) scores.push_back(it->second);
        }
        if (!scores.empty()) out.push_back(make_cluster_score(cluster.cluster_id, std::move(scores)));
    }
    return out;
}

struct RobustnessReport {
    std::string model_id;
    // Per-answer-type aggregates over scored members, in percent.
    std::optional<double> open_recall;
    std::optional<double> closed_accuracy;
    // Consistency aggregates over clusters with >= 2 scored members.
    std::optional<double> mean_mad_percent;
    std::optional<double> mean_cv_percent;
    std::size_t clusters_total = 0;
    std::size_t clusters_scored = 0;
    std::size_t members_missing = 0;
    std::size_t clusters_cv_undefined = 0;
};

/// Unweighted aggregation: member means for Recall/Acc, per-cluster means
/// for MAD/CV. Folds in cluster_id order. Clusters with undefined CV are
/// excluded from the CV mean and counted separately.
inline RobustnessReport aggregate(std::span<const QuestionCluster> clusters,
                                  const ScoreResult& scored,
                                  std::string model_id) {
    RobustnessReport report;
    report.model_id = std::move(model_id);
    report.clusters_total = clusters.size();
    report.members_missing = scored.missing.size();

    std::map<std::string_view, AnswerType> answer_types;
    for (const auto& c : clusters) answer_types[c.cluster_id] = c.answer_type;

    double open_sum = 0.0, closed_sum = 0.0;
    std::size_t open_n = 0, closed_n = 0;
    for (const auto& ms : scored.scores) {
        auto it = answer_types.find(ms.cluster_id);
        if (it == answer_types.end())
            throw ValidationError("member score references unknown cluster \"" + ms.cluster_id + "\"");
        if (it->second == AnswerType::Open) {
            open_sum += ms.score;
            ++open_n;
        } else {
            closed_sum += ms.score;
            ++closed_n;
        }
    }
    if (open_n) report.open_recall = open_sum / static_cast<double>(open_n) * 100.0;
    if (closed_n) report.closed_accuracy = closed_sum / static_cast<double>(closed_n) * 100.0;

    auto cluster_scores = collect_cluster_scores(clusters, scored.scores);
    std::sort(cluster_scores.begin(), cluster_scores.end(),
              [](const ClusterScore& a, const ClusterScore& b) { return a.cluster_id < b.cluster_id; });

    report.clusters_scored = cluster_scores.size();
    double mad_sum = 0.0, cv_sum = 0.0;
    std::size_t mad_n = 0, cv_n = 0;
    for (const auto& cs : cluster_scores) {
        if (cs.scores.size() < 2) continue;
        mad_sum += cs.mad;
        ++mad_n;
        if (cs.cv_percent) {
            cv_sum += *cs.cv_percent;
            ++cv_n;
        } else {
            ++report.clusters_cv_undefined;
        }
    }
    if (mad_n) report.mean_mad_percent = mad_sum / static_cast<double>(mad_n) * 100.0;
    if (cv_n) report.mean_cv_percent = cv_sum / static_cast<double>(cv_n);
    return report;
}

// ---------------------------------------------------------------------------
// Rendering and persistence

namespace detail {

inline std::string format_fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", places, v);
    return buf;
}

inline std::string cell(const std::optional<double>& v, int places = 1) {
    return v ? format_fixed(*v, places) : std::string("-");
}

} // namespace detail

/// Aligned table with the Recall / Acc / CV / MAD column order.
inline std::string render_report_table(std::span<const RobustnessReport> reports) {
    std::vector<std::array<std::string, 5>> rows;
    rows.push_back({"Model", "Recall", "Acc", "CV(v)", "MAD(v)"});
    for (const auto& r : reports)
        rows.push_back({r.model_id, detail::cell(r.open_recall), detail::cell(r.closed_accuracy),
                        detail::cell(r.mean_cv_percent), detail::cell(r.mean_mad_percent)});

    std::array<std::size_t, 5> width{};
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());

    std::string out;
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
        for (std::size_t i = 0; i < rows[ri].size(); ++i) {
            std::string pad(width[i] - rows[ri][i].size(), ' ');
            if (i == 0)
                out += rows[ri][i] + pad;
            else
                out += "  " + pad + rows[ri][i];
        }
        out += '\n';
        if (ri == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w;
            out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
        }
    }
    for (const auto& r : reports)
        out += "clusters: " + std::to_string(r.clusters_scored) + "/" + std::to_string(r.clusters_total) +
               " scored, " + std::to_string(r.members_missing) + " members missing, " +
               std::to_string(r.clusters_cv_undefined) + " cv-undefined [" + r.model_id + "]\n";
    return out;
}

inline ordered_json to_json(const RobustnessReport& r) {
    ordered_json j;
    j["model_id"] = r.model_id;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            j[key] = *v;
        else
            j[key] = nullptr;
    };
    put("open_recall", r.open_recall);
    put("closed_accuracy", r.closed_accuracy);
    put("mean_mad_percent", r.mean_mad_percent);
    put("mean_cv_percent", r.mean_cv_percent);
    j["clusters_total"] = r.clusters_total;
    j["clusters_scored"] = r.clusters_scored;
    j["members_missing"] = r.members_missing;
    j["clusters_cv_undefined"] = r.clusters_cv_undefined;
    return j;
}

inline RobustnessReport report_from_json(const ordered_json& j) {
    RobustnessReport r;
    r.model_id = detail::json_string_field(j, "model_id");
    auto get = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return j[key].get<double>();
    };
    r.open_recall = get("open_recall");
    r.closed_accuracy = get("closed_accuracy");
    r.mean_mad_percent = get("mean_mad_percent");
    r.mean_cv_percent = get("mean_cv_percent");
    r.clusters_total = j.value("clusters_total", 0u);
    r.clusters_scored = j.value("clusters_scored", 0u);
    r.members_missing = j.value("members_missing", 0u);
    r.clusters_cv_undefined = j.value("clusters_cv_undefined", 0u);
    return r;
}

inline void write_report(const RobustnessReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << to_json(report).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline RobustnessReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return report_from_json(j);
}

/// Per-cluster (mean, mad, cv) tuples for external plotting. CV is left
/// empty where undefined.
inline void write_plot_csv(std::span<const ClusterScore> cluster_scores, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "cluster_id,mean,mad,cv\n";
    for (const auto& cs : cluster_scores) {
        out << cs.cluster_id << ',' << detail::format_fixed(cs.mean, 6) << ','
            << detail::format_fixed(cs.mad, 6) << ',';
        if (cs.cv_percent) out << detail::format_fixed(*cs.cv_percent, 6);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace cclkit
