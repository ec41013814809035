// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include "svcca/activation_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "svcca/errors.hpp"

namespace svcca {

std::string to_string(Layout layout) {
    return layout == Layout::SamplesMajor ? "samples_major" : "neurons_major";
}

Layout parse_layout(const std::string& text) {
    if (text == "samples_major") {
        return Layout::SamplesMajor;
    }
    if (text == "neurons_major") {
        return Layout::NeuronsMajor;
    }
    throw ManifestError("unknown order '" + text + "' (expected samples_major or neurons_major)");
}

void validate_activations(const Matrix& data, const std::string& what) {
    if (data.rows() < 1) {
        throw DataError(what + ": need at least one neuron");
    }
    if (data.cols() < 2) {
        throw DataError(what + ": need at least two samples, got " + std::to_string(data.cols()));
    }
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            if (!std::isfinite(data(i, j))) {
                std::ostringstream msg;
                msg << what << ": non-finite value " << data(i, j) << " at neuron " << i
                    << ", sample " << j;
                throw DataError(msg.str());
            }
        }
    }
}

ActivationMatrix ActivationMatrix::make(Source source, Matrix data, npy::Dtype dtype) {
    std::ostringstream what;
    what << "activations of " << (source.model_id.empty() ? "<anonymous>" : source.model_id)
         << " epoch " << source.epoch << " layer " << source.layer;
    validate_activations(data, what.str());
    return ActivationMatrix(std::move(source), std::move(data), dtype);
}

ActivationMatrix ActivationMatrix::with_data(Matrix data) const {
    return make(source_, std::move(data), dtype_);
}

ActivationPayload read_activation_file(const std::filesystem::path& path, Layout layout) {
    npy::Array2D array = npy::read(path);
    const auto rows = static_cast<Eigen::Index>(array.rows);
    const auto cols = static_cast<Eigen::Index>(array.cols);
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> stored(array.values.data(), rows, cols);

    ActivationPayload out;
    out.dtype = array.dtype;
    if (layout == Layout::SamplesMajor) {
        out.data = stored.transpose();
    } else {
        out.data = stored;
    }
    for (Eigen::Index j = 0; j < out.data.cols(); ++j) {
        for (Eigen::Index i = 0; i < out.data.rows(); ++i) {
            if (!std::isfinite(out.data(i, j))) {
                std::ostringstream msg;
                msg << path.string() << ": non-finite value at neuron " << i << ", sample " << j;
                throw DataError(msg.str());
            }
        }
    }
    return out;
}

void write_activation_file(const std::filesystem::path& path, const Matrix& data,
                           npy::Dtype dtype, Layout layout) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMajor stored;
    if (layout == Layout::SamplesMajor) {
        stored = data.transpose();
    } else {
        stored = data;
    }
    std::vector<double> values(stored.data(), stored.data() + stored.size());
    npy::write(path, dtype, static_cast<std::size_t>(stored.rows()),
               static_cast<std::size_t>(stored.cols()), values);
}

// Per-entry memoization. once_flag guarantees a single load even when several
// threads fetch the same entry at the same time.
struct RunManifest::Cache {
    explicit Cache(std::size_t n) : once(new std::once_flag[n]), slots(n) {}
    std::unique_ptr<std::once_flag[]> once;
    std::vector<std::optional<ActivationMatrix>> slots;
};

bool RunManifest::has(int epoch, int layer) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const ManifestEntry& e) { return e.epoch == epoch && e.layer == layer; });
}

bool RunManifest::has_epoch(int epoch) const {
    return std::find(epochs_.begin(), epochs_.end(), epoch) != epochs_.end();
}

bool RunManifest::has_layer(int layer) const {
    return std::find(layers_.begin(), layers_.end(), layer) != layers_.end();
}

const ManifestEntry& RunManifest::entry(int epoch, int layer) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{epoch, layer},
                               [](const ManifestEntry& e, const std::pair<int, int>& key) {
                                   return std::pair{e.epoch, e.layer} < key;
                               });
    if (it == entries_.end() || it->epoch != epoch || it->layer != layer) {
        throw LookupError("run '" + model_id_ + "' has no entry for epoch " +
                          std::to_string(epoch) + ", layer " + std::to_string(layer));
    }
    return *it;
}

ActivationMatrix RunManifest::fetch(int epoch, int layer) const {
    const ManifestEntry& e = entry(epoch, layer);
    const auto index = static_cast<std::size_t>(&e - entries_.data());

    std::call_once(cache_->once[index], [&] {
        ActivationPayload payload = read_activation_file(e.path, e.layout);
        const auto declared_n = static_cast<Eigen::Index>(e.samples());
        const auto declared_d = static_cast<Eigen::Index>(e.neurons());
        if (payload.data.rows() != declared_d || payload.data.cols() != declared_n) {
            throw ManifestError(e.path.string() + ": shape changed since the manifest was loaded");
        }
        cache_->slots[index] = ActivationMatrix::make(Source{model_id_, epoch, layer},
                                                      std::move(payload.data), payload.dtype);
    });
    return *cache_->slots[index];
}

ActivationMatrix fetch(const RunManifest& run, int epoch, int layer) {
    return run.fetch(epoch, layer);
}

namespace {

using nlohmann::json;

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw ManifestError(where + ": missing \"" + key + "\"");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ManifestError(where + ": \"" + key + "\" has the wrong type");
    }
}

std::vector<int> id_list(const json& doc, const char* key, int min_value, const std::string& where) {
    auto ids = field<std::vector<int>>(doc, key, where);
    if (ids.empty()) {
        throw ManifestError(where + ": \"" + key + "\" is empty");
    }
    std::set<int> seen;
    for (int id : ids) {
        if (id < min_value) {
            throw ManifestError(where + ": \"" + key + "\" contains out-of-range id " +
                                std::to_string(id));
        }
        if (!seen.insert(id).second) {
            throw ManifestError(where + ": \"" + key + "\" repeats id " + std::to_string(id));
        }
    }
    return ids;
}

std::string entry_name(int epoch, int layer) {
    return "(epoch " + std::to_string(epoch) + ", layer " + std::to_string(layer) + ")";
}

}  // namespace

RunManifest load_run(const std::filesystem::path& manifest_path) {
    const std::string where = manifest_path.string();
    std::ifstream in(manifest_path);
    if (!in) {
        throw ManifestError(where + ": cannot open manifest");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ManifestError(where + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object()) {
        throw ManifestError(where + ": manifest must be a JSON object");
    }

    RunManifest run;
    run.manifest_path_ = manifest_path;
    run.model_id_ = field<std::string>(doc, "model_id", where);
    const auto sample_count = field<long long>(doc, "sample_count", where);
    if (sample_count < 2) {
        throw ManifestError(where + ": sample_count must be at least 2");
    }
    run.sample_count_ = static_cast<std::size_t>(sample_count);
    run.layers_ = id_list(doc, "layers", 1, where);
    run.epochs_ = id_list(doc, "epochs", 0, where);
    if (!std::is_sorted(run.epochs_.begin(), run.epochs_.end())) {
        throw ManifestError(where + ": \"epochs\" must be listed in increasing order");
    }

    const auto raw_entries = field<json>(doc, "entries", where);
    if (!raw_entries.is_array()) {
        throw ManifestError(where + ": \"entries\" must be an array");
    }
    const std::filesystem::path base = manifest_path.parent_path();
    for (const json& raw : raw_entries) {
        ManifestEntry e;
        e.epoch = field<int>(raw, "epoch", where + " entry");
        e.layer = field<int>(raw, "layer", where + " entry");
        const std::string name = where + " entry " + entry_name(e.epoch, e.layer);
        e.raw_path = field<std::string>(raw, "path", name);
        e.path = base / e.raw_path;
        const auto shape = field<std::vector<long long>>(raw, "shape", name);
        if (shape.size() != 2 || shape[0] < 1 || shape[1] < 1) {
            throw ManifestError(name + ": \"shape\" must be two positive integers");
        }
        e.rows = static_cast<std::size_t>(shape[0]);
        e.cols = static_cast<std::size_t>(shape[1]);
        e.layout = raw.contains("order") ? parse_layout(field<std::string>(raw, "order", name))
                                         : Layout::SamplesMajor;
        if (raw.contains("dtype")) {
            const auto d = field<std::string>(raw, "dtype", name);
            if (d == "<f4" || d == "float32") {
                e.dtype = npy::Dtype::Float32;
            } else if (d == "<f8" || d == "float64") {
                e.dtype = npy::Dtype::Float64;
            } else {
                throw ManifestError(name + ": unsupported dtype '" + d + "'");
            }
        }
        run.entries_.push_back(std::move(e));
    }

    // Grid checks: no strays, no duplicates, no gaps.
    std::set<std::pair<int, int>> present;
    for (const ManifestEntry& e : run.entries_) {
        if (!run.has_epoch(e.epoch) || !run.has_layer(e.layer)) {
            throw ManifestError(where + ": entry " + entry_name(e.epoch, e.layer) +
                                " lies outside the declared epochs x layers grid");
        }
        if (!present.insert({e.epoch, e.layer}).second) {
            throw ManifestError(where + ": duplicate entry " + entry_name(e.epoch, e.layer));
        }
    }
    std::vector<std::string> gaps;
    for (int epoch : run.epochs_) {
        for (int layer : run.layers_) {
            if (!present.count({epoch, layer})) {
                gaps.push_back(entry_name(epoch, layer));
            }
        }
    }
    if (!gaps.empty()) {
        std::string msg = where + ": missing " + std::to_string(gaps.size()) + " entr" +
                          (gaps.size() == 1 ? "y" : "ies") + ":";
        for (const auto& g : gaps) {
            msg += " " + g;
        }
        throw ManifestError(msg);
    }

    for (const ManifestEntry& e : run.entries_) {
        if (e.samples() != run.sample_count_) {
            throw ManifestError(where + ": entry " + entry_name(e.epoch, e.layer) + " declares N=" +
                                std::to_string(e.samples()) + " but sample_count is " +
                                std::to_string(run.sample_count_));
        }
    }

    for (const ManifestEntry& e : run.entries_) {
        if (!std::filesystem::is_regular_file(e.path)) {
            throw ManifestError(where + ": entry " + entry_name(e.epoch, e.layer) +
                                " points at missing file " + e.path.string());
        }
        const npy::Header header = npy::read_header(e.path);
        if (header.rows != e.rows || header.cols != e.cols) {
            throw ManifestError(where + ": entry " + entry_name(e.epoch, e.layer) + " declares shape [" +
                                std::to_string(e.rows) + ", " + std::to_string(e.cols) +
                                "] but file holds [" + std::to_string(header.rows) + ", " +
                                std::to_string(header.cols) + "]");
        }
        if (e.dtype && *e.dtype != header.dtype) {
            throw ManifestError(where + ": entry " + entry_name(e.epoch, e.layer) +
                                " declares dtype " + std::string(npy::descr(*e.dtype)) +
                                " but file holds " + std::string(npy::descr(header.dtype)));
        }
    }

    for (auto it = doc.begin(); it != doc.end(); ++it) {
        static const std::set<std::string> known{"model_id", "sample_count", "layers", "epochs",
                                                 "entries"};
        if (!known.count(it.key())) {
            run.annotations_[it.key()] = it->is_string() ? it->get<std::string>() : it->dump();
        }
    }

    std::sort(run.entries_.begin(), run.entries_.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return std::pair{a.epoch, a.layer} < std::pair{b.epoch, b.layer};
              });
    run.cache_ = std::make_shared<RunManifest::Cache>(run.entries_.size());
    return run;
}

}  // namespace svcca
