#include "ctca/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ctca/augment.hpp"
#include "ctca/common.hpp"
#include "ctca/metrics.hpp"
#include "ctca/svg.hpp"

namespace ctca {

namespace fs = std::filesystem;
using nlohmann::json;

void save_results(const std::string& path, const std::vector<RunResult>& results) {
    json doc;
    doc["format"] = "ctc-adapt-results";
    doc["version"] = 1;
    doc["entries"] = json::array();
    for (const RunResult& r : results) {
        json entry;
        entry["writer"] = r.writer_id;
        entry["combo"] = r.combo;
        entry["cluster"] = r.cluster_size;
        entry["run_seed"] = r.run_seed;
        entry["stop_iteration"] = r.stop_iteration;
        entry["baseline_cer"] = r.baseline_cer;
        entry["finetuned_cer"] = r.finetuned_cer;
        entry["reduction"] = r.reduction;
        doc["entries"].push_back(entry);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_results: cannot open '" + path + "'");
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("save_results: write to '" + path + "' failed");
}

std::vector<RunResult> load_results(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_results: cannot open '" + path + "'");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || doc.value("format", "") != "ctc-adapt-results" ||
        doc.value("version", 0) != 1) {
        throw IoError("load_results: '" + path + "' is not a version-1 results file");
    }
    std::vector<RunResult> out;
    for (const json& entry : doc.at("entries")) {
        RunResult r;
        r.writer_id = entry.at("writer").get<int>();
        r.combo = entry.at("combo").get<std::string>();
        r.cluster_size = entry.at("cluster").get<int>();
        r.run_seed = entry.at("run_seed").get<uint64_t>();
        r.stop_iteration = entry.at("stop_iteration").get<int64_t>();
        r.baseline_cer = entry.at("baseline_cer").get<double>();
        r.finetuned_cer = entry.at("finetuned_cer").get<double>();
        r.reduction = entry.at("reduction").get<double>();
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RunResult> load_results_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) {
        throw IoError("load_results_dir: '" + dir + "' is not a directory");
    }
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > 13 &&
            name.substr(name.size() - 13) == ".results.json") {
            files.push_back(entry.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<RunResult> out;
    for (const std::string& file : files) {
        std::vector<RunResult> part = load_results(file);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

namespace {

// Combos in the published comparison order first, stragglers after.
std::vector<std::string> combos_in_table_order(const std::vector<RunResult>& results) {
    std::set<std::string> seen;
    for (const RunResult& r : results) seen.insert(r.combo);
    std::vector<std::string> out;
    for (const std::string& name : registered_combos()) {
        if (seen.erase(name) > 0) out.push_back(name);
    }
    out.insert(out.end(), seen.begin(), seen.end());
    return out;
}

std::vector<int> clusters_sorted(const std::vector<RunResult>& results) {
    std::set<int> seen;
    for (const RunResult& r : results) seen.insert(r.cluster_size);
    return std::vector<int>(seen.begin(), seen.end());
}

std::vector<ReductionRecord> select(const std::vector<RunResult>& results,
                                    const std::string& combo, int cluster) {
    std::vector<ReductionRecord> records;
    for (const RunResult& r : results) {
        if (r.combo == combo && r.cluster_size == cluster) {
            records.push_back({r.writer_id, r.baseline_cer, r.finetuned_cer, r.reduction});
        }
    }
    return records;
}

} // namespace

std::string reduction_table(const std::vector<RunResult>& results) {
    if (results.empty()) throw ProtocolError("no runs found");
    std::ostringstream out;
    out << "combo      cluster    mean   stddev      min   median      max  writers\n";
    for (const std::string& combo : combos_in_table_order(results)) {
        for (int cluster : clusters_sorted(results)) {
            const std::vector<ReductionRecord> records = select(results, combo, cluster);
            if (records.empty()) continue;
            const WriterStats stats = aggregate(records);
            char line[160];
            std::snprintf(line, sizeof(line),
                          "%-10s %7d %+7.4f %8.4f %+8.4f %+8.4f %+8.4f %8zu\n",
                          combo.c_str(), cluster, stats.mean, stats.stddev, stats.min,
                          stats.median, stats.max, stats.writer_ids.size());
            out << line;
        }
    }
    return out.str();
}

ReportPaths write_report(const std::vector<RunResult>& results, const std::string& out_dir) {
    if (results.empty()) throw ProtocolError("no runs found");
    fs::create_directories(out_dir);
    ReportPaths paths;

    paths.table = (fs::path(out_dir) / "reductions.txt").string();
    {
        std::ofstream out(paths.table, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("write_report: cannot write '" + paths.table + "'");
        out << reduction_table(results);
    }

    const std::vector<std::string> combos = combos_in_table_order(results);
    const std::vector<int> clusters = clusters_sorted(results);

    // Mean reduction per combo at the largest cluster with full coverage.
    int combo_cluster = clusters.back();
    for (auto it = clusters.rbegin(); it != clusters.rend(); ++it) {
        bool covered = true;
        for (const std::string& combo : combos) {
            if (select(results, combo, *it).empty()) covered = false;
        }
        if (covered) {
            combo_cluster = *it;
            break;
        }
    }
    {
        std::vector<std::string> labels;
        std::vector<double> means;
        for (const std::string& combo : combos) {
            const auto records = select(results, combo, combo_cluster);
            if (records.empty()) continue;
            labels.push_back(combo);
            means.push_back(aggregate(records).mean);
        }
        const std::string path = (fs::path(out_dir) / "reduction_vs_combo.svg").string();
        write_bar_chart(path, "Relative CER reduction by augmentation, " +
                                  std::to_string(combo_cluster) + " lines",
                        "augmentation combo", "relative reduction", labels, means);
        paths.plots.push_back(path);
    }

    // Per-writer reduction against cluster size, one chart per combo.
    for (const std::string& combo : combos) {
        std::map<int, ChartSeries> by_writer;
        for (int cluster : clusters) {
            const auto records = select(results, combo, cluster);
            std::map<int, std::pair<double, int>> sums;
            for (const ReductionRecord& rec : records) {
                sums[rec.writer_id].first += rec.reduction;
                sums[rec.writer_id].second += 1;
            }
            for (const auto& [writer, sum_count] : sums) {
                ChartSeries& series = by_writer[writer];
                if (series.label.empty()) series.label = "writer " + std::to_string(writer);
                series.x.push_back(static_cast<double>(cluster));
                series.y.push_back(sum_count.first / sum_count.second);
            }
        }
        if (by_writer.empty()) continue;
        std::vector<ChartSeries> series;
        for (auto& [writer, s] : by_writer) series.push_back(std::move(s));
        const std::string path =
            (fs::path(out_dir) / ("reduction_vs_cluster_" + combo + ".svg")).string();
        write_line_chart(path, "Reduction vs adaptation lines (" + combo + ")",
                         "adaptation lines", "relative reduction", series, true);
        paths.plots.push_back(path);
    }

    // Per-writer mean reduction at the largest cluster, first combo in order.
    {
        const std::string combo = combos.front();
        const auto records = select(results, combo, combo_cluster);
        if (!records.empty()) {
            const WriterStats stats = aggregate(records);
            std::vector<std::string> labels;
            for (int id : stats.writer_ids) labels.push_back(std::to_string(id));
            const std::string path = (fs::path(out_dir) / "writer_reductions.svg").string();
            write_bar_chart(path, "Per-writer reduction (" + combo + ", " +
                                      std::to_string(combo_cluster) + " lines)",
                            "writer", "relative reduction", labels, stats.per_writer_mean);
            paths.plots.push_back(path);
        }
    }
    return paths;
}

} // namespace ctca
