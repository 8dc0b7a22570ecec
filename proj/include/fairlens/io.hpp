/*
 * Copyright 2026 The FairLens Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// On-disk formats.
//
// Matrix, text form: comma-separated, first line is a header, one row per
// sample. Matrix, binary form: the 8 bytes "FLENSMAT", then little-endian
// uint64 version (= 1), n, d, then n*d little-endian float64 values in row
// major order. Attribute file: one non-negative integer label per line,
// optionally preceded by comment lines of the form "# <label>=<name>".

#pragma once

#include <openssl/evp.h>

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fairlens/error.hpp"
#include "fairlens/representation.hpp"

namespace fairlens::io {

inline constexpr std::array<char, 8> kMatrixMagic = {'F', 'L', 'E', 'N', 'S', 'M', 'A', 'T'};
inline constexpr std::uint64_t kMatrixVersion = 1;

enum class MatrixFormat { kText, kBinary };

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write to '" + path + "' failed");
}

// %.17g round-trips every finite double.
inline std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const std::string& in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline std::string matrix_to_text(const Eigen::MatrixXd& m, const std::vector<std::string>& header = {}) {
  std::string out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (j) out += ',';
    out += j < static_cast<Eigen::Index>(header.size()) ? header[j] : "f" + std::to_string(j);
  }
  out += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::string matrix_to_binary(const Eigen::MatrixXd& m) {
  std::string out(kMatrixMagic.begin(), kMatrixMagic.end());
  detail::put_u64(out, kMatrixVersion);
  detail::put_u64(out, static_cast<std::uint64_t>(m.rows()));
  detail::put_u64(out, static_cast<std::uint64_t>(m.cols()));
  out.reserve(out.size() + 8 * static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_u64(out, std::bit_cast<std::uint64_t>(m(i, j)));
  }
  return out;
}

inline void write_matrix(const std::string& path, const Eigen::MatrixXd& m, MatrixFormat format,
                         const std::vector<std::string>& header = {}) {
  write_file_bytes(path, format == MatrixFormat::kBinary ? matrix_to_binary(m) : matrix_to_text(m, header));
}

inline Eigen::MatrixXd parse_matrix_binary(const std::string& bytes, const std::string& name) {
  constexpr std::size_t kHeader = 8 + 3 * 8;
  if (bytes.size() < kHeader) throw ParseError(name, 1, "truncated binary matrix header");
  const auto version = detail::get_u64(bytes, 8);
  if (version != kMatrixVersion) {
    throw ParseError(name, 1, "unsupported binary matrix version " + std::to_string(version));
  }
  const auto n = detail::get_u64(bytes, 16);
  const auto d = detail::get_u64(bytes, 24);
  if (d != 0 && n > (bytes.size() / 8) / d) throw ParseError(name, 1, "declared n*d exceeds payload");
  if (bytes.size() - kHeader != 8 * n * d) {
    throw ParseError(name, 1, "payload holds " + std::to_string((bytes.size() - kHeader) / 8) +
                                  " values, header declares n*d = " + std::to_string(n * d));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::size_t offset = kHeader;
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < d; ++j, offset += 8) {
      const double v = std::bit_cast<double>(detail::get_u64(bytes, offset));
      if (!std::isfinite(v)) {
        throw ParseError(name, 1, "non-finite value at row " + std::to_string(i) + ", column " +
                                      std::to_string(j));
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return m;
}

inline Eigen::MatrixXd parse_matrix_text(std::string_view text, const std::string& name) {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines[0]).empty()) throw ParseError(name, 1, "missing header line");
  std::size_t cols = 1;
  for (char ch : lines[0]) cols += ch == ',' ? 1 : 0;

  std::vector<double> values;
  std::size_t rows = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto line = detail::trim(lines[li]);
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto field = detail::trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw ParseError(name, li + 1, "cannot parse '" + std::string(field) + "' as a number");
      }
      if (!std::isfinite(v)) throw ParseError(name, li + 1, "non-finite value");
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (count != cols) {
      throw ParseError(name, li + 1, "expected " + std::to_string(cols) + " fields, found " +
                                         std::to_string(count));
    }
    ++rows;
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = values[i * cols + j];
  }
  return m;
}

// Format is detected from the magic bytes.
inline Eigen::MatrixXd read_matrix(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() >= kMatrixMagic.size() &&
      std::memcmp(bytes.data(), kMatrixMagic.data(), kMatrixMagic.size()) == 0) {
    return parse_matrix_binary(bytes, path);
  }
  return parse_matrix_text(bytes, path);
}

struct AttributeFile {
  std::vector<int> labels;
  std::map<int, std::string> names;
};

inline AttributeFile parse_attributes(std::string_view text, const std::string& name) {
  AttributeFile out;
  const auto lines = detail::split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto line = detail::trim(lines[li]);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!out.labels.empty()) throw ParseError(name, li + 1, "comment lines must precede the labels");
      const auto body = detail::trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;  // free-form comment
      const auto key = detail::trim(body.substr(0, eq));
      int label = 0;
      const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), label);
      if (ec != std::errc() || ptr != key.data() + key.size() || label < 0) {
        throw ParseError(name, li + 1, "bad label in name mapping '" + std::string(body) + "'");
      }
      out.names[label] = std::string(detail::trim(body.substr(eq + 1)));
      continue;
    }
    int label = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), label);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw ParseError(name, li + 1, "cannot parse '" + std::string(line) + "' as an integer label");
    }
    if (label < 0) throw ParseError(name, li + 1, "labels must be non-negative");
    out.labels.push_back(label);
  }
  if (out.labels.empty()) throw ParseError(name, lines.size() + 1, "no labels found");
  return out;
}

inline AttributeFile read_attributes(const std::string& path) {
  return parse_attributes(read_file_bytes(path), path);
}

inline std::string attributes_to_text(const std::vector<int>& labels,
                                      const std::vector<std::string>& names = {}) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] != std::to_string(i)) out += "# " + std::to_string(i) + "=" + names[i] + "\n";
  }
  for (int z : labels) out += std::to_string(z) + "\n";
  return out;
}

inline void write_attributes(const std::string& path, const std::vector<int>& labels,
                             const std::vector<std::string>& names = {}) {
  write_file_bytes(path, attributes_to_text(labels, names));
}

inline RepresentationSet load_representation_set(const std::string& rep_path,
                                                 const std::string& attr_path) {
  Eigen::MatrixXd rep = read_matrix(rep_path);
  AttributeFile attrs = read_attributes(attr_path);
  if (static_cast<Eigen::Index>(attrs.labels.size()) != rep.rows()) {
    throw DimensionError(attr_path + " has " + std::to_string(attrs.labels.size()) + " labels but " +
                         rep_path + " has " + std::to_string(rep.rows()) + " rows");
  }
  int m = 0;
  for (int z : attrs.labels) m = std::max(m, z + 1);
  for (const auto& [label, _] : attrs.names) m = std::max(m, label + 1);
  std::vector<std::string> names;
  for (int c = 0; c < m; ++c) {
    const auto it = attrs.names.find(c);
    names.push_back(it == attrs.names.end() ? std::to_string(c) : it->second);
  }
  return make_representation_set(std::move(rep), std::move(attrs.labels), std::move(names));
}

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest.data(), &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(read_file_bytes(path)); }

}  // namespace fairlens::io
