// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "svcca/analysis.hpp"

namespace svcca::report {

inline constexpr const char* kToolName = "svcca";
inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr const char* kSeriesHeader =
    "comparison_id,mode,layer_key,epoch,mean_coefficient,rank_a,rank_b";
inline constexpr const char* kPairsHeader =
    "comparison_id,epoch,layer_a,layer_b,mean_coefficient,rank_a,rank_b";

/// Nine significant digits, "%.9g". Every number in a report goes through
/// here so that files are byte-stable.
std::string format_number(double value);

/// `value` rounded to what format_number prints, for embedding in JSON.
double rounded(double value);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& text);

void write_series_csv(std::ostream& out, const std::vector<TrajectorySeries>& series);
void write_pairs_csv(std::ostream& out, const LayerPairMatrix& pairs);

/// Parses a file written by write_series_csv back into series, grouped by
/// (comparison_id, layer) in order of first appearance.
std::vector<TrajectorySeries> read_series_csv(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const SvccaConfig& cfg);
nlohmann::ordered_json to_json(const LayerDeviationSummary& summary);
nlohmann::ordered_json to_json(const LayerPairMatrix& pairs);
nlohmann::ordered_json per_layer_json(const std::map<int, double>& values);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Truncates `path` and writes `text`; throws ConfigError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace svcca::report
