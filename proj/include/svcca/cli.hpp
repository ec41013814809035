// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "svcca/analysis.hpp"
#include "svcca/svcca_core.hpp"

namespace svcca::cli {

/// Environment variable consulted for the default --jobs value.
inline constexpr const char* kJobsEnv = "SVCCA_JOBS";

enum class Command { CompareRuns, LayerPairs, Convergence, Deviation, GenSynthetic, Selftest };

std::string to_string(Command command);

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kNumericalFailure = 2 };

struct AnalysisJob {
    Command command = Command::Selftest;
    /// compare-runs / deviation: [A, B]; layer-pairs: [run];
    /// convergence: one or more runs.
    std::vector<std::filesystem::path> inputs;
    std::optional<std::filesystem::path> series_csv;  ///< deviation from a prior report
    std::optional<std::filesystem::path> spec;        ///< gen-synthetic
    SvccaConfig cfg;
    std::filesystem::path output_dir;
    EpochAlignment align = EpochAlignment::Strict;
    std::optional<std::filesystem::path> metrics_fixture;
    std::string layers = "all";
    std::string epochs = "all";
    std::optional<int> epoch;  ///< layer-pairs
    std::string comparison_id;
    int jobs = 1;
    std::vector<std::string> argv;  ///< recorded in the run log
};

/// "all" -> {} (meaning every layer); otherwise comma-separated ids and
/// inclusive ranges, e.g. "1-6,9,12". Result is sorted and unique.
std::vector<int> parse_id_list(const std::string& text, const char* what);

/// "all" -> {}; "first-N" -> the N smallest of `available`; otherwise an id
/// list as for layers.
std::vector<int> parse_epoch_spec(const std::string& text, const std::vector<int>& available);

/// Hardware concurrency, overridden by SVCCA_JOBS when set to a positive
/// integer.
int default_jobs();

/// Executes a job and writes its report files. Diagnostics go to `err`.
/// Returns 0 on success, 1 on validation errors and 2 on numerical errors.
int run(const AnalysisJob& job, std::ostream& out, std::ostream& err);

/// Runs the in-process self-test suites; 0 iff all pass, 2 otherwise.
int selftest(std::ostream& out);

/// Parses command-line arguments and dispatches to run().
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace svcca::cli
