#pragma once

// Calibration report (JSON) and reliability rows (CSV). JSON numbers go
// through nlohmann's shortest-round-trip formatting; CSV doubles are
// printed with 17 significant digits, so emit/parse is lossless.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "logitconf/metrics.hpp"

namespace logitconf {

struct ReportFile {
    CalibrationReport calibration;
    std::string method = "unspecified";
    uint64_t sample_count = 0;
    uint64_t seed = 0;
    double wall_time_seconds = 0.0;
    std::optional<double> miou;
    std::optional<std::vector<double>> per_class_iou;
};

inline nlohmann::json report_to_json(const ReportFile& r) {
    nlohmann::json j;
    j["scheme"] = scheme_name(r.calibration.scheme);
    j["requested_bins"] = r.calibration.requested_bins;
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : r.calibration.bins) {
        bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mean_confidence", b.mean_confidence},
                        {"accuracy", b.accuracy}});
    }
    j["bins"] = std::move(bins);
    j["ace"] = r.calibration.ace;
    j["ece"] = r.calibration.ece;
    j["total_samples"] = r.calibration.total_samples;
    if (r.miou) j["miou"] = *r.miou;
    if (r.per_class_iou) {
        nlohmann::json arr = nlohmann::json::array();
        for (double v : *r.per_class_iou) {
            if (std::isnan(v)) arr.push_back(nullptr); // excluded class
            else arr.push_back(v);
        }
        j["per_class_iou"] = std::move(arr);
    }
    j["method"] = r.method;
    j["sample_count"] = r.sample_count;
    j["seed"] = r.seed;
    j["wall_time_seconds"] = r.wall_time_seconds;
    return j;
}

inline ReportFile report_from_json(const nlohmann::json& j) {
    ReportFile r;
    r.calibration.scheme = parse_scheme(j.at("scheme").get<std::string>());
    r.calibration.requested_bins = j.at("requested_bins").get<uint32_t>();
    for (const auto& jb : j.at("bins")) {
        BinStats b;
        b.lower = jb.at("lower").get<double>();
        b.upper = jb.at("upper").get<double>();
        b.count = jb.at("count").get<uint64_t>();
        b.mean_confidence = jb.at("mean_confidence").get<double>();
        b.accuracy = jb.at("accuracy").get<double>();
        r.calibration.bins.push_back(b);
    }
    r.calibration.ace = j.at("ace").get<double>();
    r.calibration.ece = j.at("ece").get<double>();
    r.calibration.total_samples = j.at("total_samples").get<uint64_t>();
    if (j.contains("miou")) r.miou = j.at("miou").get<double>();
    if (j.contains("per_class_iou")) {
        std::vector<double> v;
        for (const auto& e : j.at("per_class_iou"))
            v.push_back(e.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                    : e.get<double>());
        r.per_class_iou = std::move(v);
    }
    r.method = j.at("method").get<std::string>();
    r.sample_count = j.at("sample_count").get<uint64_t>();
    r.seed = j.at("seed").get<uint64_t>();
    r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
    return r;
}

inline void write_report(const std::string& path, const ReportFile& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << report_to_json(r).dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline ReportFile read_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    in >> j;
    return report_from_json(j);
}

// ---------------------------------------------------------------------------
// Reliability rows as CSV

inline std::string format_csv_rows(std::span<const BinStats> rows) {
    std::string s = "lower,upper,count,mean_confidence,accuracy\n";
    char buf[256];
    for (const auto& b : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%llu,%.17g,%.17g\n",
                      b.lower, b.upper, static_cast<unsigned long long>(b.count),
                      b.mean_confidence, b.accuracy);
        s += buf;
    }
    return s;
}

inline void write_csv(const std::string& path, std::span<const BinStats> rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << format_csv_rows(rows);
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<BinStats> parse_csv_rows(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty CSV");
    if (line != "lower,upper,count,mean_confidence,accuracy")
        throw std::runtime_error("unexpected CSV header: " + line);
    std::vector<BinStats> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        BinStats b;
        unsigned long long count = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%llu,%lf,%lf",
                        &b.lower, &b.upper, &count, &b.mean_confidence,
                        &b.accuracy) != 5)
            throw std::runtime_error("malformed CSV row: " + line);
        b.count = count;
        rows.push_back(b);
    }
    return rows;
}

inline std::vector<BinStats> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv_rows(ss.str());
}

} // namespace logitconf
