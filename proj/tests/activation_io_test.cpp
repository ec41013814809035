// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <functional>
#include <limits>
#include <thread>

#include "svcca/activation_io.hpp"
#include "svcca/errors.hpp"
#include "test_util.hpp"

namespace {

using namespace svcca;
using svcca::testing::TempDir;
using svcca::testing::read_bytes;
using nlohmann::json;

const std::filesystem::path kData = SVCCA_TEST_DATA_DIR;

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

TEST(ReadActivationFile, HandWrittenMatrix) {
    const ActivationPayload p = read_activation_file(kData / "numpy_f8_2x3.npy");
    EXPECT_EQ(p.data.rows(), 2);
    EXPECT_EQ(p.data.cols(), 3);
    EXPECT_EQ(p.data(1, 0), 4.0);
    EXPECT_EQ(p.dtype, npy::Dtype::Float64);
}

TEST(ReadActivationFile, ZeroMatrixLoads) {
    const ActivationPayload p = read_activation_file(kData / "numpy_zeros_2x2.npy");
    EXPECT_TRUE(p.data.isZero(0.0));
}

TEST(ReadActivationFile, NonFiniteIsDataError) {
    EXPECT_THROW(read_activation_file(kData / "numpy_nan_2x2.npy"), DataError);
    TempDir tmp;
    Matrix m = Matrix::Ones(3, 4);
    m(2, 1) = std::numeric_limits<double>::infinity();
    write_activation_file(tmp / "inf.npy", m);
    EXPECT_THROW(read_activation_file(tmp / "inf.npy"), DataError);
}

TEST(ReadActivationFile, SamplesMajorIsTransposed) {
    // On disk (5 samples, 3 neurons); in memory (3, 5).
    const ActivationPayload p =
        read_activation_file(kData / "numpy_f4_samples_major_5x3.npy", Layout::SamplesMajor);
    ASSERT_EQ(p.data.rows(), 3);
    ASSERT_EQ(p.data.cols(), 5);
    EXPECT_EQ(p.data(0, 1), 3 * 0.25 - 1.0);
    EXPECT_EQ(p.data(2, 4), 14 * 0.25 - 1.0);
}

TEST(ReadActivationFile, RoundTripIsByteExact) {
    TempDir tmp;
    for (const auto& [name, layout] :
         {std::pair{"numpy_f8_2x3.npy", Layout::NeuronsMajor},
          std::pair{"numpy_f4_samples_major_5x3.npy", Layout::SamplesMajor}}) {
        const ActivationPayload p = read_activation_file(kData / name, layout);
        write_activation_file(tmp / name, p.data, p.dtype, layout);
        EXPECT_EQ(read_bytes(tmp / name), read_bytes(kData / name)) << name;
    }
}

TEST(ActivationMatrix, EnforcesInvariants) {
    EXPECT_THROW(ActivationMatrix::make({}, Matrix::Ones(3, 1)), DataError);
    EXPECT_THROW(ActivationMatrix::make({}, Matrix(0, 5)), DataError);
    Matrix bad = Matrix::Ones(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(ActivationMatrix::make({}, bad), DataError);
    const auto ok = ActivationMatrix::make({"m", 3, 7}, Matrix::Ones(1, 2));
    EXPECT_EQ(ok.neurons(), 1);
    EXPECT_EQ(ok.samples(), 2);
    EXPECT_EQ(ok.source().layer, 7);
}

// A 2-epoch x 12-layer grid with N = 100, written by hand so each test can
// corrupt one aspect of it.
class ManifestTest : public ::testing::Test {
protected:
    void SetUp() override {
        std::mt19937_64 rng(7);
        doc_ = {{"model_id", "fisher_lm"},
                {"sample_count", 100},
                {"layers", json::array()},
                {"epochs", {1, 2}},
                {"entries", json::array()}};
        for (int l = 1; l <= 12; ++l) {
            doc_["layers"].push_back(l);
        }
        for (int e = 1; e <= 2; ++e) {
            for (int l = 1; l <= 12; ++l) {
                const std::string file = "e" + std::to_string(e) + "l" + std::to_string(l) + ".npy";
                write_activation_file(tmp_ / file, svcca::testing::gaussian(rng, 16, 100),
                                      npy::Dtype::Float32, Layout::SamplesMajor);
                doc_["entries"].push_back({{"epoch", e},
                                           {"layer", l},
                                           {"path", file},
                                           {"shape", {100, 16}},
                                           {"order", "samples_major"}});
            }
        }
    }

    std::filesystem::path save() {
        const auto path = tmp_ / "manifest.json";
        std::ofstream(path) << doc_.dump();
        return path;
    }

    json& entry(int epoch, int layer) {
        for (auto& e : doc_["entries"]) {
            if (e["epoch"] == epoch && e["layer"] == layer) {
                return e;
            }
        }
        throw std::logic_error("no such entry");
    }

    TempDir tmp_;
    json doc_;
};

TEST_F(ManifestTest, CompleteGridLoads) {
    const RunManifest run = load_run(save());
    EXPECT_EQ(run.model_id(), "fisher_lm");
    EXPECT_EQ(run.entries().size(), 24u);
    EXPECT_EQ(run.entries().size(), run.epochs().size() * run.layers().size());
    EXPECT_EQ(run.sample_count(), 100u);
}

TEST_F(ManifestTest, MissingEntryIsNamed) {
    auto& entries = doc_["entries"];
    entries.erase(std::remove_if(entries.begin(), entries.end(),
                                 [](const json& e) { return e["epoch"] == 2 && e["layer"] == 7; }),
                  entries.end());
    const auto path = save();
    EXPECT_THROW(load_run(path), ManifestError);
    EXPECT_NE(message_of([&] { load_run(path); }).find("(epoch 2, layer 7)"), std::string::npos);
}

TEST_F(ManifestTest, AllGapsAreListed) {
    auto& entries = doc_["entries"];
    entries.erase(std::remove_if(entries.begin(), entries.end(),
                                 [](const json& e) { return e["layer"] == 3; }),
                  entries.end());
    const std::string msg = message_of([&] { load_run(save()); });
    EXPECT_NE(msg.find("(epoch 1, layer 3)"), std::string::npos);
    EXPECT_NE(msg.find("(epoch 2, layer 3)"), std::string::npos);
}

TEST_F(ManifestTest, InconsistentSampleCountIsNamed) {
    write_activation_file(tmp_ / "short.npy", Matrix::Ones(16, 99), npy::Dtype::Float32,
                          Layout::SamplesMajor);
    entry(1, 5)["path"] = "short.npy";
    entry(1, 5)["shape"] = {99, 16};
    const std::string msg = message_of([&] { load_run(save()); });
    EXPECT_NE(msg.find("(epoch 1, layer 5)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("N=99"), std::string::npos) << msg;
    EXPECT_THROW(load_run(save()), ManifestError);
}

TEST_F(ManifestTest, DeclaredShapeMustMatchFile) {
    entry(2, 2)["shape"] = {100, 17};
    EXPECT_THROW(load_run(save()), ManifestError);
}

TEST_F(ManifestTest, StructuralErrors) {
    doc_["entries"].push_back(entry(1, 1));
    EXPECT_THROW(load_run(save()), ManifestError);  // duplicate
    doc_["entries"].erase(doc_["entries"].end() - 1);

    entry(1, 1)["epoch"] = 3;
    EXPECT_THROW(load_run(save()), ManifestError);  // outside grid
    entry(3, 1)["epoch"] = 1;

    entry(1, 1)["path"] = "nope.npy";
    EXPECT_THROW(load_run(save()), ManifestError);  // missing file
    entry(1, 1)["path"] = "e1l1.npy";

    entry(1, 1)["order"] = "sideways";
    EXPECT_THROW(load_run(save()), ManifestError);
    entry(1, 1)["order"] = "samples_major";

    entry(1, 1)["dtype"] = "<f8";
    EXPECT_THROW(load_run(save()), ManifestError);  // file holds <f4
    entry(1, 1)["dtype"] = "<f4";
    EXPECT_NO_THROW(load_run(save()));

    doc_.erase("model_id");
    EXPECT_THROW(load_run(save()), ManifestError);

    std::ofstream(tmp_ / "broken.json") << "{ not json";
    EXPECT_THROW(load_run(tmp_ / "broken.json"), ManifestError);
    EXPECT_THROW(load_run(tmp_ / "absent.json"), ManifestError);
}

TEST_F(ManifestTest, FetchDelegatesToReader) {
    const RunManifest run = load_run(save());
    const ActivationMatrix m = fetch(run, 1, 1);
    const ActivationPayload direct = read_activation_file(tmp_ / "e1l1.npy", Layout::SamplesMajor);
    EXPECT_EQ(m.data(), direct.data);
    EXPECT_EQ(m.source(), (Source{"fisher_lm", 1, 1}));
    EXPECT_EQ(static_cast<std::size_t>(m.samples()), run.sample_count());
}

TEST_F(ManifestTest, FetchOutsideGridFails) {
    const RunManifest run = load_run(save());
    EXPECT_THROW(run.fetch(99, 1), LookupError);
    EXPECT_THROW(run.fetch(1, 13), LookupError);
}

TEST_F(ManifestTest, RepeatedFetchIsBitIdentical) {
    const RunManifest run = load_run(save());
    const ActivationMatrix a = run.fetch(1, 3);
    const ActivationMatrix b = run.fetch(1, 3);
    ASSERT_EQ(a.data().size(), b.data().size());
    EXPECT_EQ(std::memcmp(a.data().data(), b.data().data(),
                          sizeof(double) * static_cast<std::size_t>(a.data().size())),
              0);
}

TEST_F(ManifestTest, ConcurrentFetchAgrees) {
    const RunManifest run = load_run(save());
    std::vector<Matrix> seen(8);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < seen.size(); ++t) {
        threads.emplace_back([&, t] { seen[t] = run.fetch(2, 4).data(); });
    }
    for (auto& th : threads) {
        th.join();
    }
    for (const auto& m : seen) {
        EXPECT_EQ(m, seen.front());
    }
}

TEST_F(ManifestTest, EverySampleCountMatchesManifest) {
    const RunManifest run = load_run(save());
    for (int e : run.epochs()) {
        for (int l : run.layers()) {
            EXPECT_EQ(static_cast<std::size_t>(run.fetch(e, l).samples()), run.sample_count());
        }
    }
}

TEST_F(ManifestTest, NonFinitePayloadFailsOnFetch) {
    Matrix m = Matrix::Ones(16, 100);
    m(3, 3) = std::numeric_limits<double>::quiet_NaN();
    write_activation_file(tmp_ / "e1l1.npy", m, npy::Dtype::Float32, Layout::SamplesMajor);
    const RunManifest run = load_run(save());  // header is fine
    EXPECT_THROW(run.fetch(1, 1), DataError);
}

TEST_F(ManifestTest, NeuronsMajorEntries) {
    write_activation_file(tmp_ / "nm.npy", Matrix::Constant(16, 100, 2.0), npy::Dtype::Float64,
                          Layout::NeuronsMajor);
    entry(1, 1)["path"] = "nm.npy";
    entry(1, 1)["shape"] = {16, 100};
    entry(1, 1)["order"] = "neurons_major";
    const RunManifest run = load_run(save());
    EXPECT_EQ(run.fetch(1, 1).data(), Matrix::Constant(16, 100, 2.0));
}

}  // namespace
