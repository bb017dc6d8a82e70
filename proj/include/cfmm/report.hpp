// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Run reports. Per-sample records go to CSV
//
//   sample,min_rate,q_0..q_{K-1},rate_0..rate_{K-1},net_0..net_{K-1},wall_seconds
//
// and the summary plus provenance to a JSON document. Doubles are written
// with 17 significant digits so both files round-trip exactly.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "cfmm/binary_io.hpp"
#include "cfmm/config.hpp"
#include "cfmm/config_io.hpp"
#include "cfmm/errors.hpp"
#include "cfmm/stats.hpp"

namespace cfmm {

enum class Method { baseline, max_power, dnn, dnn_online };

inline const char* to_string(Method m)
{
    switch (m) {
    case Method::baseline: return "baseline";
    case Method::max_power: return "max-power";
    case Method::dnn: return "dnn";
    case Method::dnn_online: return "dnn-online";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    for (Method m : {Method::baseline, Method::max_power, Method::dnn, Method::dnn_online})
        if (s == to_string(m))
            return m;
    throw ValidationError("unknown method '" + s + "' (baseline, max-power, dnn, dnn-online)");
}

struct SampleRecord {
    std::size_t index = 0;
    Eigen::VectorXd q;
    Eigen::VectorXd rates; // bits/s/Hz
    double min_rate = 0.0;
    Eigen::VectorXd net;   // bits/s
    double wall_seconds = 0.0;
};

struct ReportSummary {
    std::size_t samples = 0;
    double avg_min_rate = 0.0;
    double p5_net_throughput = 0.0; // "95% likely" per-user net throughput
    double mean_net_throughput = 0.0;
    double total_wall_seconds = 0.0;
    std::vector<CdfPoint> min_rate_cdf;
    std::vector<CdfPoint> net_throughput_cdf;
};

inline constexpr std::size_t default_cdf_grid = 101;

inline ReportSummary summarize(const std::vector<SampleRecord>& records, std::size_t cdf_grid = default_cdf_grid)
{
    require(!records.empty(), "cannot summarize an empty report");
    std::vector<double> mins;
    std::vector<double> pooled;
    double wall = 0.0;
    for (const auto& r : records) {
        mins.push_back(r.min_rate);
        for (Eigen::Index k = 0; k < r.net.size(); ++k)
            pooled.push_back(r.net(k));
        wall += r.wall_seconds;
    }
    const EmpiricalCdf min_cdf(mins);
    const EmpiricalCdf net_cdf(pooled);
    ReportSummary s;
    s.samples = records.size();
    s.avg_min_rate = ordered_mean(mins);
    s.p5_net_throughput = net_cdf.percentile(0.05);
    s.mean_net_throughput = ordered_mean(pooled);
    s.total_wall_seconds = wall;
    s.min_rate_cdf = min_cdf.points(cdf_grid);
    s.net_throughput_cdf = net_cdf.points(cdf_grid);
    return s;
}

struct RunReport {
    Method method = Method::baseline;
    std::string input_transform = "n/a";
    int num_aps = 0;
    int num_users = 0;
    std::uint64_t config_digest = 0;
    std::uint64_t dataset_digest = 0;
    std::uint64_t dataset_seed = 0;
    std::string dataset_split;
    nlohmann::json provenance = nlohmann::json::object(); // free-form: configs, seeds
    std::vector<SampleRecord> records;
    ReportSummary summary;
};

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string records_csv(const std::vector<SampleRecord>& records, int num_users)
{
    std::ostringstream os;
    os << "sample,min_rate";
    for (const char* prefix : {"q_", "rate_", "net_"})
        for (int k = 0; k < num_users; ++k)
            os << ',' << prefix << k;
    os << ",wall_seconds\n";
    for (const auto& r : records) {
        os << r.index << ',' << format_double(r.min_rate);
        for (const Eigen::VectorXd* v : {&r.q, &r.rates, &r.net})
            for (Eigen::Index k = 0; k < v->size(); ++k)
                os << ',' << format_double((*v)(k));
        os << ',' << format_double(r.wall_seconds) << '\n';
    }
    return os.str();
}

inline double parse_double(std::string_view s)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError("bad number in CSV: '" + std::string(s) + "'");
    return v;
}

inline std::vector<SampleRecord> parse_records_csv(const std::string& text, int& num_users)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("sample,min_rate", 0) != 0)
        throw FormatError("per-sample CSV: missing header");
    const auto cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
    if ((cols - 3) % 3 != 0 || cols < 6)
        throw FormatError("per-sample CSV: unexpected column count");
    num_users = (cols - 3) / 3;

    std::vector<SampleRecord> out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string_view> f;
        std::string_view rest(line);
        while (true) {
            const auto pos = rest.find(',');
            f.push_back(rest.substr(0, pos));
            if (pos == std::string_view::npos)
                break;
            rest.remove_prefix(pos + 1);
        }
        if (static_cast<int>(f.size()) != cols)
            throw FormatError("per-sample CSV: ragged row");
        SampleRecord r;
        r.index = static_cast<std::size_t>(parse_double(f[0]));
        r.min_rate = parse_double(f[1]);
        r.q.resize(num_users);
        r.rates.resize(num_users);
        r.net.resize(num_users);
        for (int k = 0; k < num_users; ++k) {
            r.q(k) = parse_double(f[static_cast<std::size_t>(2 + k)]);
            r.rates(k) = parse_double(f[static_cast<std::size_t>(2 + num_users + k)]);
            r.net(k) = parse_double(f[static_cast<std::size_t>(2 + 2 * num_users + k)]);
        }
        r.wall_seconds = parse_double(f.back());
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Summary JSON

inline nlohmann::json cdf_json(const std::vector<CdfPoint>& pts)
{
    auto arr = nlohmann::json::array();
    for (const auto& p : pts)
        arr.push_back({p.value, p.probability});
    return arr;
}

inline std::vector<CdfPoint> cdf_from_json(const nlohmann::json& arr)
{
    std::vector<CdfPoint> out;
    for (const auto& p : arr)
        out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return out;
}

inline nlohmann::json summary_json(const RunReport& rep)
{
    const auto& s = rep.summary;
    return {
        {"format", "cfmm-report/1"},
        {"method", to_string(rep.method)},
        {"input_transform", rep.input_transform},
        {"num_aps", rep.num_aps},
        {"num_users", rep.num_users},
        {"config_digest", hex_digest(rep.config_digest)},
        {"dataset_digest", hex_digest(rep.dataset_digest)},
        {"dataset_seed", rep.dataset_seed},
        {"dataset_split", rep.dataset_split},
        {"provenance", rep.provenance},
        {"summary",
         {{"samples", s.samples},
          {"avg_min_rate", s.avg_min_rate},
          {"p5_net_throughput", s.p5_net_throughput},
          {"mean_net_throughput", s.mean_net_throughput},
          {"total_wall_seconds", s.total_wall_seconds},
          {"min_rate_cdf", cdf_json(s.min_rate_cdf)},
          {"net_throughput_cdf", cdf_json(s.net_throughput_cdf)}}},
    };
}

inline std::uint64_t parse_hex_digest(const std::string& s)
{
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError("bad digest '" + s + "'");
    return v;
}

struct ReportPaths {
    std::filesystem::path samples_csv;
    std::filesystem::path summary_json;
};

inline ReportPaths report_paths(const std::filesystem::path& dir, const std::string& stem)
{
    return {dir / (stem + "_samples.csv"), dir / (stem + "_summary.json")};
}

inline void save_report(const RunReport& rep, const ReportPaths& paths, bool force)
{
    write_file(paths.samples_csv, records_csv(rep.records, rep.num_users), force);
    write_file(paths.summary_json, summary_json(rep).dump(2) + "\n", force);
}

inline RunReport load_report(const ReportPaths& paths)
{
    RunReport rep;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(paths.summary_json));
        if (j.at("format") != "cfmm-report/1")
            throw FormatError(paths.summary_json.string() + ": unknown report format");
        rep.method = parse_method(j.at("method").get<std::string>());
        rep.input_transform = j.at("input_transform").get<std::string>();
        rep.num_aps = j.at("num_aps").get<int>();
        rep.num_users = j.at("num_users").get<int>();
        rep.config_digest = parse_hex_digest(j.at("config_digest").get<std::string>());
        rep.dataset_digest = parse_hex_digest(j.at("dataset_digest").get<std::string>());
        rep.dataset_seed = j.at("dataset_seed").get<std::uint64_t>();
        rep.dataset_split = j.at("dataset_split").get<std::string>();
        rep.provenance = j.at("provenance");
        const auto& s = j.at("summary");
        rep.summary.samples = s.at("samples").get<std::size_t>();
        rep.summary.avg_min_rate = s.at("avg_min_rate").get<double>();
        rep.summary.p5_net_throughput = s.at("p5_net_throughput").get<double>();
        rep.summary.mean_net_throughput = s.at("mean_net_throughput").get<double>();
        rep.summary.total_wall_seconds = s.at("total_wall_seconds").get<double>();
        rep.summary.min_rate_cdf = cdf_from_json(s.at("min_rate_cdf"));
        rep.summary.net_throughput_cdf = cdf_from_json(s.at("net_throughput_cdf"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(paths.summary_json.string() + ": " + e.what());
    }
    int k = 0;
    rep.records = parse_records_csv(read_file(paths.samples_csv), k);
    if (k != rep.num_users)
        throw FormatError("per-sample CSV user count differs from summary");
    return rep;
}

/// Largest absolute difference between the stored summary and one
/// recomputed from the per-sample records.
inline double summary_discrepancy(const ReportSummary& a, const ReportSummary& b)
{
    if (a.samples != b.samples || a.min_rate_cdf.size() != b.min_rate_cdf.size()
        || a.net_throughput_cdf.size() != b.net_throughput_cdf.size())
        return std::numeric_limits<double>::infinity();
    const auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(y)); };
    double d = std::max({rel(a.avg_min_rate, b.avg_min_rate), rel(a.p5_net_throughput, b.p5_net_throughput),
                         rel(a.mean_net_throughput, b.mean_net_throughput),
                         rel(a.total_wall_seconds, b.total_wall_seconds)});
    for (std::size_t i = 0; i < a.min_rate_cdf.size(); ++i)
        d = std::max({d, rel(a.min_rate_cdf[i].value, b.min_rate_cdf[i].value),
                      rel(a.min_rate_cdf[i].probability, b.min_rate_cdf[i].probability)});
    for (std::size_t i = 0; i < a.net_throughput_cdf.size(); ++i)
        d = std::max({d, rel(a.net_throughput_cdf[i].value, b.net_throughput_cdf[i].value),
                      rel(a.net_throughput_cdf[i].probability, b.net_throughput_cdf[i].probability)});
    return d;
}

} // namespace cfmm
