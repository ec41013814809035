// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include "svcca/npy.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "svcca/errors.hpp"

namespace svcca::npy {

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr std::size_t kPreambleSize = 10;  // magic + version + u16 length
constexpr std::size_t kAlignment = 64;

[[noreturn]] void fail(const std::string& what) {
    throw FormatError("npy: " + what);
}

// Minimal cursor over the header dict literal, e.g.
// {'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }
class DictCursor {
public:
    explicit DictCursor(std::string_view text) : text_(text) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!consume(c)) {
            fail(std::string("expected '") + c + "' in header");
        }
    }

    std::string quoted() {
        skip_ws();
        if (pos_ >= text_.size() || (text_[pos_] != '\'' && text_[pos_] != '"')) {
            fail("expected quoted string in header");
        }
        const char quote = text_[pos_++];
        const std::size_t end = text_.find(quote, pos_);
        if (end == std::string_view::npos) {
            fail("unterminated string in header");
        }
        std::string out(text_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return out;
    }

    std::string word() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    std::size_t integer() {
        const std::string digits = word();
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
            fail("bad integer '" + digits + "' in shape");
        }
        try {
            return static_cast<std::size_t>(std::stoull(digits));
        } catch (const std::exception&) {
            fail("shape entry out of range");
        }
    }

    bool at_end() {
        skip_ws();
        return pos_ == text_.size();
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

std::uint64_t load_le(const unsigned char* p, std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

void store_le(std::uint64_t v, std::size_t n, std::string& out) {
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string_view descr(Dtype dtype) {
    return dtype == Dtype::Float32 ? "<f4" : "<f8";
}

std::size_t item_size(Dtype dtype) {
    return dtype == Dtype::Float32 ? 4 : 8;
}

Header parse_header(std::string_view bytes) {
    if (bytes.size() < kPreambleSize || bytes.substr(0, kMagic.size()) != kMagic) {
        fail("missing magic string");
    }
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    if (raw[6] != 1 || raw[7] != 0) {
        fail("unsupported format version " + std::to_string(raw[6]) + "." +
             std::to_string(raw[7]));
    }
    const std::size_t header_len = load_le(raw + 8, 2);
    if (bytes.size() < kPreambleSize + header_len) {
        fail("truncated header");
    }
    std::string_view dict = bytes.substr(kPreambleSize, header_len);
    if (dict.empty() || dict.back() != '\n') {
        fail("header not newline-terminated");
    }

    Header header;
    header.data_offset = kPreambleSize + header_len;
    bool have_descr = false, have_order = false, have_shape = false;

    DictCursor cur(dict);
    cur.expect('{');
    while (!cur.consume('}')) {
        const std::string key = cur.quoted();
        cur.expect(':');
        if (key == "descr") {
            const std::string d = cur.quoted();
            if (d == "<f4") {
                header.dtype = Dtype::Float32;
            } else if (d == "<f8") {
                header.dtype = Dtype::Float64;
            } else {
                fail("unsupported dtype '" + d + "' (need <f4 or <f8)");
            }
            have_descr = true;
        } else if (key == "fortran_order") {
            const std::string v = cur.word();
            if (v == "True") {
                fail("fortran_order arrays are not supported");
            }
            if (v != "False") {
                fail("bad fortran_order value '" + v + "'");
            }
            have_order = true;
        } else if (key == "shape") {
            cur.expect('(');
            std::vector<std::size_t> dims;
            while (!cur.consume(')')) {
                dims.push_back(cur.integer());
                cur.consume(',');
            }
            if (dims.size() != 2) {
                fail("expected a 2-D array, got " + std::to_string(dims.size()) + "-D");
            }
            header.rows = dims[0];
            header.cols = dims[1];
            have_shape = true;
        } else {
            fail("unexpected header key '" + key + "'");
        }
        cur.consume(',');
    }
    if (!cur.at_end()) {
        fail("trailing characters after header dict");
    }
    if (!have_descr || !have_order || !have_shape) {
        fail("header missing descr, fortran_order or shape");
    }
    return header;
}

Header read_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail("cannot open " + path.string());
    }
    std::string pre(kPreambleSize, '\0');
    in.read(pre.data(), static_cast<std::streamsize>(pre.size()));
    if (in.gcount() != static_cast<std::streamsize>(kPreambleSize)) {
        fail(path.string() + ": file shorter than preamble");
    }
    const std::size_t header_len =
        load_le(reinterpret_cast<const unsigned char*>(pre.data()) + 8, 2);
    std::string dict(header_len, '\0');
    in.read(dict.data(), static_cast<std::streamsize>(header_len));
    if (in.gcount() != static_cast<std::streamsize>(header_len)) {
        fail(path.string() + ": truncated header");
    }
    try {
        return parse_header(pre + dict);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

Array2D read(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    Header header;
    try {
        header = parse_header(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    const std::size_t count = header.rows * header.cols;
    const std::size_t width = item_size(header.dtype);
    if (bytes.size() != header.data_offset + count * width) {
        fail(path.string() + ": payload is " + std::to_string(bytes.size() - header.data_offset) +
             " bytes, header implies " + std::to_string(count * width));
    }

    Array2D out;
    out.dtype = header.dtype;
    out.rows = header.rows;
    out.cols = header.cols;
    out.values.resize(count);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + header.data_offset;
    for (std::size_t i = 0; i < count; ++i, p += width) {
        if (header.dtype == Dtype::Float32) {
            out.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(load_le(p, 4)));
        } else {
            out.values[i] = std::bit_cast<double>(load_le(p, 8));
        }
    }
    return out;
}

std::string encode_header(Dtype dtype, std::size_t rows, std::size_t cols) {
    std::ostringstream dict;
    dict << "{'descr': '" << descr(dtype) << "', 'fortran_order': False, 'shape': (" << rows
         << ", " << cols << "), }";
    std::string text = dict.str();
    // Pad so the payload begins on an aligned boundary; newline is the last byte.
    const std::size_t unpadded = kPreambleSize + text.size() + 1;
    const std::size_t padded = (unpadded + kAlignment - 1) / kAlignment * kAlignment;
    text.append(padded - unpadded, ' ');
    text.push_back('\n');
    if (text.size() > 0xFFFF) {
        fail("header too long for format version 1.0");
    }

    std::string out(kMagic);
    out.push_back('\x01');
    out.push_back('\x00');
    store_le(text.size(), 2, out);
    out += text;
    return out;
}

void write(const std::filesystem::path& path, Dtype dtype, std::size_t rows, std::size_t cols,
           const std::vector<double>& values) {
    if (values.size() != rows * cols) {
        throw std::invalid_argument("npy::write: value count does not match shape");
    }
    std::string bytes = encode_header(dtype, rows, cols);
    bytes.reserve(bytes.size() + values.size() * item_size(dtype));
    for (double v : values) {
        if (dtype == Dtype::Float32) {
            store_le(std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4, bytes);
        } else {
            store_le(std::bit_cast<std::uint64_t>(v), 8, bytes);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail("short write to " + path.string());
    }
}

}  // namespace svcca::npy
