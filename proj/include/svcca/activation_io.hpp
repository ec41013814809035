// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svcca/npy.hpp"

namespace svcca {

using Matrix = Eigen::MatrixXd;

/// On-disk orientation of an activation array.
enum class Layout {
    SamplesMajor,  ///< (N, d): one row per probe sample, the usual framework dump
    NeuronsMajor,  ///< (d, N)
};

std::string to_string(Layout layout);
Layout parse_layout(const std::string& text);

/// Identifies where a matrix came from.
struct Source {
    std::string model_id;
    int epoch = 0;
    int layer = 0;

    friend bool operator==(const Source&, const Source&) = default;
};

/// One layer's activations at one (model, epoch).
///
/// Rows are neurons and columns are probe samples. Construction goes through
/// `make`, which enforces the invariants: every entry finite, at least one
/// neuron and at least two samples.
class ActivationMatrix {
public:
    static ActivationMatrix make(Source source, Matrix data,
                                 npy::Dtype dtype = npy::Dtype::Float64);

    const Source& source() const { return source_; }
    const Matrix& data() const { return data_; }
    npy::Dtype dtype() const { return dtype_; }
    Eigen::Index neurons() const { return data_.rows(); }
    Eigen::Index samples() const { return data_.cols(); }

    /// Same source, new values. Used by transforms such as centering that
    /// preserve the invariants by construction.
    ActivationMatrix with_data(Matrix data) const;

private:
    ActivationMatrix(Source source, Matrix data, npy::Dtype dtype)
        : source_(std::move(source)), data_(std::move(data)), dtype_(dtype) {}

    Source source_;
    Matrix data_;
    npy::Dtype dtype_ = npy::Dtype::Float64;
};

/// Throws DataError unless `data` is finite with d >= 1 and N >= 2.
void validate_activations(const Matrix& data, const std::string& what);

struct ActivationPayload {
    Matrix data;  ///< (d, N)
    npy::Dtype dtype = npy::Dtype::Float64;
};

/// Reads an NPY activation file and returns it in (neurons, samples)
/// orientation, transposing when the file is samples-major. Values are
/// promoted to double. Non-finite entries raise DataError.
ActivationPayload read_activation_file(const std::filesystem::path& path,
                                       Layout layout = Layout::NeuronsMajor);

/// Inverse of read_activation_file: `data` is (d, N) and is written in the
/// requested on-disk layout and dtype.
void write_activation_file(const std::filesystem::path& path, const Matrix& data,
                           npy::Dtype dtype = npy::Dtype::Float64,
                           Layout layout = Layout::NeuronsMajor);

struct ManifestEntry {
    int epoch = 0;
    int layer = 0;
    std::filesystem::path path;  ///< resolved against the manifest directory
    std::string raw_path;        ///< as written in the manifest
    std::size_t rows = 0;        ///< declared on-disk shape
    std::size_t cols = 0;
    Layout layout = Layout::SamplesMajor;
    std::optional<npy::Dtype> dtype;

    std::size_t neurons() const { return layout == Layout::SamplesMajor ? cols : rows; }
    std::size_t samples() const { return layout == Layout::SamplesMajor ? rows : cols; }
};

/// Validated index of one training run: a complete epochs x layers grid of
/// activation files that all share the same probe sample count.
///
/// Activations are loaded lazily and memoized on first fetch. The manifest is
/// immutable after load_run and fetch may be called from several threads.
class RunManifest {
public:
    const std::string& model_id() const { return model_id_; }
    std::size_t sample_count() const { return sample_count_; }
    const std::vector<int>& layers() const { return layers_; }
    const std::vector<int>& epochs() const { return epochs_; }
    const std::filesystem::path& manifest_path() const { return manifest_path_; }
    /// Entries sorted by (epoch, layer).
    const std::vector<ManifestEntry>& entries() const { return entries_; }

    bool has(int epoch, int layer) const;
    bool has_epoch(int epoch) const;
    bool has_layer(int layer) const;
    const ManifestEntry& entry(int epoch, int layer) const;

    /// Loads and validates the activation for (epoch, layer).
    /// Throws LookupError for a request outside the grid.
    ActivationMatrix fetch(int epoch, int layer) const;

    /// Unvalidated extra keys from the manifest (e.g. generator identity).
    const std::map<std::string, std::string>& annotations() const { return annotations_; }

private:
    friend RunManifest load_run(const std::filesystem::path& manifest_path);
    struct Cache;

    std::string model_id_;
    std::size_t sample_count_ = 0;
    std::vector<int> layers_;
    std::vector<int> epochs_;
    std::vector<ManifestEntry> entries_;
    std::map<std::string, std::string> annotations_;
    std::filesystem::path manifest_path_;
    std::shared_ptr<Cache> cache_;
};

/// Parses and validates a manifest. Checks grid completeness, a common
/// sample count and each file's header against its declared shape; payloads
/// are not read.
RunManifest load_run(const std::filesystem::path& manifest_path);

/// Free-function spelling of RunManifest::fetch.
ActivationMatrix fetch(const RunManifest& run, int epoch, int layer);

}  // namespace svcca
