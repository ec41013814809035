// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>

#include <random>

#include "svcca/errors.hpp"
#include "svcca/npy.hpp"
#include "test_util.hpp"

namespace {

using namespace svcca;
using svcca::testing::TempDir;
using svcca::testing::read_bytes;
using svcca::testing::write_bytes;

const std::filesystem::path kData = SVCCA_TEST_DATA_DIR;

TEST(Npy, ReadsNumpyFloat64) {
    const npy::Array2D a = npy::read(kData / "numpy_f8_2x3.npy");
    EXPECT_EQ(a.dtype, npy::Dtype::Float64);
    EXPECT_EQ(a.rows, 2u);
    EXPECT_EQ(a.cols, 3u);
    EXPECT_EQ(a.values, (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(Npy, ReadsNumpyFloat32) {
    const npy::Array2D a = npy::read(kData / "numpy_f4_samples_major_5x3.npy");
    EXPECT_EQ(a.dtype, npy::Dtype::Float32);
    ASSERT_EQ(a.values.size(), 15u);
    for (std::size_t i = 0; i < 15; ++i) {
        EXPECT_EQ(a.values[i], static_cast<double>(i) * 0.25 - 1.0);
    }
}

TEST(Npy, WriterReproducesNumpyBytes) {
    TempDir tmp;
    for (const char* name : {"numpy_f8_2x3.npy", "numpy_f4_samples_major_5x3.npy",
                             "numpy_zeros_2x2.npy"}) {
        const npy::Array2D a = npy::read(kData / name);
        npy::write(tmp / name, a.dtype, a.rows, a.cols, a.values);
        EXPECT_EQ(read_bytes(tmp / name), read_bytes(kData / name)) << name;
    }
}

TEST(Npy, HeaderIsAlignedAndNewlineTerminated) {
    for (std::size_t rows : {1u, 12u, 100000u}) {
        const std::string h = npy::encode_header(npy::Dtype::Float64, rows, 512);
        EXPECT_EQ(h.size() % 64, 0u);
        EXPECT_EQ(h.back(), '\n');
        EXPECT_EQ(npy::parse_header(h).rows, rows);
        EXPECT_EQ(npy::parse_header(h).data_offset, h.size());
    }
}

TEST(Npy, RejectsUnsupportedLayouts) {
    EXPECT_THROW(npy::read(kData / "numpy_3d.npy"), FormatError);
    EXPECT_THROW(npy::read(kData / "numpy_int.npy"), FormatError);
    EXPECT_THROW(npy::read(kData / "numpy_fortran_2x3.npy"), FormatError);
    EXPECT_THROW(npy::read(kData / "numpy_big_endian.npy"), FormatError);
}

TEST(Npy, RejectsCorruptFiles) {
    TempDir tmp;
    const std::string good = read_bytes(kData / "numpy_f8_2x3.npy");

    write_bytes(tmp / "magic.npy", "NOTNPY" + good.substr(6));
    EXPECT_THROW(npy::read(tmp / "magic.npy"), FormatError);

    write_bytes(tmp / "short.npy", good.substr(0, good.size() - 8));
    EXPECT_THROW(npy::read(tmp / "short.npy"), FormatError);

    write_bytes(tmp / "long.npy", good + "xxxxxxxx");
    EXPECT_THROW(npy::read(tmp / "long.npy"), FormatError);

    std::string v2 = good;
    v2[6] = 2;
    write_bytes(tmp / "v2.npy", v2);
    EXPECT_THROW(npy::read(tmp / "v2.npy"), FormatError);

    write_bytes(tmp / "tiny.npy", "\x93NUM");
    EXPECT_THROW(npy::read(tmp / "tiny.npy"), FormatError);

    EXPECT_THROW(npy::read(tmp / "absent.npy"), FormatError);
}

// Canonical files survive read -> write unchanged, for random shapes and
// both dtypes.
TEST(Npy, RoundTripIsByteExactProperty) {
    TempDir tmp;
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t rows = 1 + rng() % 40;
        const std::size_t cols = 1 + rng() % 40;
        const auto dtype = trial % 2 ? npy::Dtype::Float32 : npy::Dtype::Float64;
        std::vector<double> values(rows * cols);
        std::normal_distribution<double> normal;
        for (double& v : values) {
            v = dtype == npy::Dtype::Float32 ? static_cast<float>(normal(rng)) : normal(rng);
        }
        const auto first = tmp / "first.npy";
        const auto second = tmp / "second.npy";
        npy::write(first, dtype, rows, cols, values);
        const npy::Array2D back = npy::read(first);
        EXPECT_EQ(back.values, values);
        npy::write(second, back.dtype, back.rows, back.cols, back.values);
        ASSERT_EQ(read_bytes(first), read_bytes(second)) << "trial " << trial;
    }
}

}  // namespace
