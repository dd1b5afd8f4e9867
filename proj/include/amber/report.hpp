#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amber/error.hpp"
#include "amber/stream.hpp"

namespace amber {

namespace detail {

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("output: cannot open " + path + " for writing");
    f << content;
    if (!f) throw DataError("output: write failed for " + path);
}

} // namespace detail

inline void write_metrics_json(const std::string& path, const RunLedger& ledger,
                               const nlohmann::ordered_json& config_echo) {
    nlohmann::ordered_json doc;
    doc["avg_accuracy"] = ledger.avg_accuracy;
    doc["avg_forgetting"] = ledger.avg_forgetting;
    doc["rows"] = ledger.matrix;
    doc["seed"] = ledger.seed;
    doc["config_hash"] = ledger.config_hash;
    doc["config"] = config_echo;
    detail::write_text_file(path, doc.dump(2) + "\n");
}

// One line per row of the lower-triangular accuracy matrix, 6 decimals.
inline void write_accuracy_matrix_csv(const std::string& path, const RunLedger& ledger) {
    std::string out;
    for (const auto& row : ledger.matrix) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            out += detail::fixed6(row[j]);
        }
        out += '\n';
    }
    detail::write_text_file(path, out);
}

inline void write_steps_csv(const std::string& path, const std::vector<StepRecord>& steps) {
    std::string out = "step,task,l_apa,l_task,l_total\n";
    for (const auto& s : steps) {
        out += std::to_string(s.step) + ',' + std::to_string(s.task) + ',' +
               detail::fixed6(s.losses.l_apa) + ',' + detail::fixed6(s.losses.l_task) + ',' +
               detail::fixed6(s.losses.l_total) + '\n';
    }
    detail::write_text_file(path, out);
}

struct AblationRow {
    std::string variant;
    std::uint64_t seed = 0;
    double avg_accuracy = 0.0;
    double avg_forgetting = 0.0;
};

// Per-run rows followed by one mean row per variant (seed column "mean").
inline void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows,
                               const std::vector<std::string>& variant_order) {
    std::string out = "variant,seed,avg_accuracy,avg_forgetting\n";
    for (const auto& r : rows) {
        out += r.variant + ',' + std::to_string(r.seed) + ',' +
               detail::fixed6(r.avg_accuracy) + ',' + detail::fixed6(r.avg_forgetting) + '\n';
    }
    for (const auto& variant : variant_order) {
        double acc = 0.0, forget = 0.0;
        std::size_t n = 0;
        for (const auto& r : rows) {
            if (r.variant != variant) continue;
            acc += r.avg_accuracy;
            forget += r.avg_forgetting;
            n += 1;
        }
        if (n == 0) continue;
        out += variant + ",mean," + detail::fixed6(acc / static_cast<double>(n)) + ',' +
               detail::fixed6(forget / static_cast<double>(n)) + '\n';
    }
    detail::write_text_file(path, out);
}

struct MetricsSummary {
    std::vector<std::vector<double>> matrix;
    double avg_accuracy = 0.0;
    double avg_forgetting = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

inline MetricsSummary read_metrics_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("report: cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("report: " + path + " is not valid JSON: " + e.what());
    }
    MetricsSummary out;
    try {
        out.avg_accuracy = doc.at("avg_accuracy").get<double>();
        out.avg_forgetting = doc.at("avg_forgetting").get<double>();
        out.matrix = doc.at("rows").get<std::vector<std::vector<double>>>();
        out.seed = doc.at("seed").get<std::uint64_t>();
        out.config_hash = doc.at("config_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report: " + path + " is missing required fields: " + e.what());
    }
    for (std::size_t i = 0; i < out.matrix.size(); ++i) {
        if (out.matrix[i].size() != i + 1)
            throw DataError("report: " + path + " has a malformed accuracy matrix");
    }
    if (out.matrix.empty()) throw DataError("report: " + path + " has an empty accuracy matrix");
    return out;
}

// Combined incremental-accuracy curves for a set of runs.
inline std::string incremental_csv(const std::vector<std::string>& run_names,
                                   const std::vector<MetricsSummary>& runs) {
    std::string out = "run,after_task,incremental_accuracy\n";
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto curve = incremental_curve(runs[r].matrix);
        for (std::size_t i = 0; i < curve.size(); ++i) {
            out += run_names[r] + ',' + std::to_string(i + 1) + ',' +
                   detail::fixed6(curve[i]) + '\n';
        }
    }
    return out;
}

} // namespace amber
