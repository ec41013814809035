// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include <iostream>

#include "svcca/cli.hpp"

int main(int argc, char** argv) {
    return svcca::cli::main(argc, argv, std::cout, std::cerr);
}
