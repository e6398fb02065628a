// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "ecolora/error.hpp"

namespace ecolora {

using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols = {
        "round",          "global_loss",     "train_loss",     "k_A",           "k_B",
        "participants",   "upload_bytes",    "download_bytes", "upload_dense",  "upload_params",
        "download_dense", "download_params", "upload_s",       "communication_s", "round_s",
        "gini_A",         "gini_B",          "overhead_ops",   "segments"};
    return cols;
}

std::string reports_to_csv(const std::vector<RoundReport>& reports) {
    std::ostringstream out;
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : reports) {
        const auto n = r.clients.size();
        out << r.round << ',' << num(r.global_loss) << ',' << num(r.train_loss) << ',' << num(r.k_A) << ','
            << num(r.k_B) << ',' << n << ',' << r.upload_bytes() << ',' << r.download_bytes() << ','
            << r.upload_dense() << ',' << r.upload_nonzeros() << ',' << r.download_dense * n << ','
            << r.download_nonzeros * n << ',' << num(r.time.upload_s) << ',' << num(r.time.communication_s)
            << ',' << num(r.time.round_total_s) << ',' << num(r.gini_A) << ',' << num(r.gini_B) << ','
            << r.overhead_ops << ',';
        // client:segment pairs, ';'-separated
        for (std::size_t i = 0; i < n; ++i) {
            out << (i ? ";" : "") << r.clients[i].client_id << ':' << r.clients[i].segment;
        }
        out << '\n';
    }
    return out.str();
}

json summary_to_json(const RunSummary& s) {
    json times = json::array();
    for (const auto& t : s.times) {
        times.push_back({{"scenario", t.scenario},
                         {"upload_s", t.upload_s},
                         {"communication_s", t.communication_s},
                         {"total_s", t.total_s}});
    }
    return {{"rounds", s.rounds},
            {"total_len", s.total_len},
            {"initial_loss", s.initial_loss},
            {"final_loss", s.final_loss},
            {"upload_dense", s.upload_dense},
            {"upload_params", s.upload_params},
            {"download_dense", s.download_dense},
            {"download_params", s.download_params},
            {"total_params", s.total_params()},
            {"upload_bytes", s.upload_bytes},
            {"download_bytes", s.download_bytes},
            {"overhead_ops", s.overhead_ops},
            {"times", times}};
}

RunSummary summary_from_json(const json& j) {
    RunSummary s;
    try {
        s.rounds = j.at("rounds").get<int>();
        s.total_len = j.at("total_len").get<std::size_t>();
        s.initial_loss = j.at("initial_loss").get<double>();
        s.final_loss = j.at("final_loss").get<double>();
        s.upload_dense = j.at("upload_dense").get<std::uint64_t>();
        s.upload_params = j.at("upload_params").get<std::uint64_t>();
        s.download_dense = j.at("download_dense").get<std::uint64_t>();
        s.download_params = j.at("download_params").get<std::uint64_t>();
        s.upload_bytes = j.at("upload_bytes").get<std::uint64_t>();
        s.download_bytes = j.at("download_bytes").get<std::uint64_t>();
        s.overhead_ops = j.at("overhead_ops").get<std::uint64_t>();
        for (const auto& t : j.at("times")) {
            s.times.push_back({t.at("scenario").get<std::string>(), t.at("upload_s").get<double>(),
                               t.at("communication_s").get<double>(), t.at("total_s").get<double>()});
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("summary json: ") + e.what());
    }
    return s;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << contents;
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_metrics(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_file_atomic(dir / "rounds.csv", reports_to_csv(result.reports));
    write_file_atomic(dir / "summary.json", summary_to_json(result.summary).dump(2) + "\n");
}

}  // namespace ecolora
