// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace svcca::npy {

enum class Dtype { Float32, Float64 };

/// "<f4" / "<f8"
std::string_view descr(Dtype dtype);
std::size_t item_size(Dtype dtype);

struct Header {
    Dtype dtype = Dtype::Float64;
    std::size_t rows = 0;
    std::size_t cols = 0;
    /// Byte offset of the payload from the start of the file.
    std::size_t data_offset = 0;
};

/// Array as stored: row-major (C order) values promoted to double.
struct Array2D {
    Dtype dtype = Dtype::Float64;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};

/// Parses the version 1.0 header of a 2-D little-endian float array.
/// Only C-ordered "<f4" and "<f8" are accepted; everything else is a
/// FormatError.
Header parse_header(std::string_view bytes);
Header read_header(const std::filesystem::path& path);

Array2D read(const std::filesystem::path& path);

/// Canonical header bytes, as numpy writes them: dict literal padded with
/// spaces and a trailing newline so that the payload starts on a 64-byte
/// boundary.
std::string encode_header(Dtype dtype, std::size_t rows, std::size_t cols);

/// Writes `values` (row-major, rows * cols) in canonical form. Float32
/// output rounds each value to nearest.
void write(const std::filesystem::path& path, Dtype dtype, std::size_t rows,
           std::size_t cols, const std::vector<double>& values);

}  // namespace svcca::npy
