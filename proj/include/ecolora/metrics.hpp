// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Persistence of round reports (CSV) and run summaries (JSON). Files are
// written to a temporary sibling and renamed into place.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecolora/experiment.hpp"

namespace ecolora {

/// Column order of the rounds CSV; stable across releases.
const std::vector<std::string>& csv_columns();

std::string reports_to_csv(const std::vector<RoundReport>& reports);

nlohmann::json summary_to_json(const RunSummary& summary);
RunSummary summary_from_json(const nlohmann::json& j);

/// Writes `contents` to `path` atomically. Throws IoError naming the path.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Writes <dir>/rounds.csv and <dir>/summary.json, creating `dir` if needed.
void write_metrics(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace ecolora
