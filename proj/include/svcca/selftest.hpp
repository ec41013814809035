// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace svcca::selftest {

struct SuiteResult {
    std::string name;
    int cases = 0;
    int failures = 0;
    std::string detail;  ///< first failure, or a short summary
    double seconds = 0.0;

    bool passed() const { return failures == 0 && cases > 0; }
};

/// Oracle agreement, invariance, truncation and planted-recovery suites,
/// run in-process on seeded synthetic data.
std::vector<SuiteResult> run_all();

/// Prints one row per suite; returns true iff every suite passed.
bool print_table(std::ostream& out, const std::vector<SuiteResult>& results);

}  // namespace svcca::selftest
