// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include "svcca/report.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>

#include "svcca/errors.hpp"

namespace svcca::report {

using nlohmann::ordered_json;

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

double rounded(double value) {
    return std::strtod(format_number(value).c_str(), nullptr);
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n\r") == std::string::npos) {
        return text;
    }
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

void write_series_csv(std::ostream& out, const std::vector<TrajectorySeries>& series) {
    out << kSeriesHeader << '\n';
    for (const auto& s : series) {
        for (const auto& p : s.points) {
            out << csv_field(s.comparison_id) << ',' << to_string(s.mode) << ',' << s.layer << ','
                << p.epoch << ',' << format_number(p.mean_coefficient) << ',' << p.rank_a << ','
                << p.rank_b << '\n';
        }
    }
}

void write_pairs_csv(std::ostream& out, const LayerPairMatrix& pairs) {
    out << kPairsHeader << '\n';
    const auto n = static_cast<std::size_t>(pairs.coefficients.rows());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out << csv_field(pairs.comparison_id) << ',' << pairs.epoch << ',' << pairs.layers[i]
                << ',' << pairs.layers[j] << ','
                << format_number(pairs.coefficients(static_cast<Eigen::Index>(i),
                                                    static_cast<Eigen::Index>(j)))
                << ',' << pairs.ranks[i] << ',' << pairs.ranks[j] << '\n';
        }
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted) {
        throw FormatError(where + ": unterminated quoted field");
    }
    return fields;
}

int parse_int(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used == text.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw FormatError(where + ": expected an integer, got '" + text + "'");
}

double parse_double(const std::string& text, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) {
        throw FormatError(where + ": expected a number, got '" + text + "'");
    }
    return v;
}

}  // namespace

std::vector<TrajectorySeries> read_series_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != kSeriesHeader) {
        throw FormatError(path.string() + ": expected header '" + std::string(kSeriesHeader) + "'");
    }

    std::vector<TrajectorySeries> out;
    std::map<std::pair<std::string, int>, std::size_t> index;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        const auto f = split_csv_line(line, where);
        if (f.size() != 7) {
            throw FormatError(where + ": expected 7 fields, got " + std::to_string(f.size()));
        }
        SeriesMode mode;
        if (f[1] == "cross_model") {
            mode = SeriesMode::CrossModel;
        } else if (f[1] == "within_model") {
            mode = SeriesMode::WithinModel;
        } else {
            throw FormatError(where + ": unknown mode '" + f[1] + "'");
        }
        const int layer = parse_int(f[2], where);
        auto key = std::make_pair(f[0], layer);
        auto it = index.find(key);
        if (it == index.end()) {
            TrajectorySeries s;
            s.comparison_id = f[0];
            s.mode = mode;
            s.layer = layer;
            it = index.emplace(key, out.size()).first;
            out.push_back(std::move(s));
        }
        TrajectorySeries& s = out[it->second];
        TrajectoryPoint p{parse_int(f[3], where), parse_double(f[4], where), parse_int(f[5], where),
                          parse_int(f[6], where)};
        if (!s.points.empty() && p.epoch <= s.points.back().epoch) {
            throw FormatError(where + ": epochs must increase within a series");
        }
        s.points.push_back(p);
    }
    return out;
}

ordered_json to_json(const SvccaConfig& cfg) {
    ordered_json doc;
    doc["variance_threshold"] = cfg.variance_threshold;
    doc["regularization_epsilon"] = cfg.regularization_epsilon;
    doc["center"] = cfg.center;
    return doc;
}

ordered_json per_layer_json(const std::map<int, double>& values) {
    ordered_json doc = ordered_json::object();
    for (const auto& [layer, v] : values) {
        doc[std::to_string(layer)] = rounded(v);
    }
    return doc;
}

ordered_json to_json(const LayerDeviationSummary& summary) {
    ordered_json doc;
    doc["comparison_id"] = summary.comparison_id;
    doc["statistic"] = "population_std";
    doc["per_layer"] = per_layer_json(summary.per_layer);
    doc["single_point_layers"] = summary.single_point_layers;
    return doc;
}

ordered_json to_json(const LayerPairMatrix& pairs) {
    ordered_json doc;
    doc["comparison_id"] = pairs.comparison_id;
    doc["epoch"] = pairs.epoch;
    doc["layers"] = pairs.layers;
    doc["ranks"] = pairs.ranks;
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < pairs.coefficients.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < pairs.coefficients.cols(); ++j) {
            row.push_back(rounded(pairs.coefficients(i, j)));
        }
        rows.push_back(std::move(row));
    }
    doc["coefficients"] = std::move(rows);
    return doc;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read " + path.string() + " for digest");
    }
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw ConfigError("sha256: digest initialisation failed");
    }
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        const auto got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got)) != 1) {
            throw ConfigError("sha256: digest update failed");
        }
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md;
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
        throw ConfigError("sha256: digest finalisation failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex += kHex[md[i] >> 4];
        hex += kHex[md[i] & 0xF];
    }
    return hex;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw ConfigError("short write to " + path.string());
    }
}

}  // namespace svcca::report
