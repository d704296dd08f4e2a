#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "levyspec/ensemble.hpp"
#include "levyspec/errors.hpp"

namespace levyspec::io {

/// Binary layout: magic "LSPM", u32 version (1), u64 rows, u64 cols, u32 tag,
/// then rows*cols f64 in row-major order. All integers and doubles
/// little-endian (the only byte order this code targets).
inline constexpr char kMagic[4] = {'L', 'S', 'P', 'M'};
inline constexpr std::uint32_t kVersion = 1;

inline void save_matrix(const std::string& path, const Eigen::MatrixXd& m,
                        ensemble::MatrixTag tag) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("save_matrix: cannot open " + path);
  f.write(kMagic, 4);
  auto put32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto put64 = [&](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  put32(kVersion);
  put64(std::uint64_t(m.rows()));
  put64(std::uint64_t(m.cols()));
  put32(std::uint32_t(tag));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      f.write(reinterpret_cast<const char*>(&v), 8);
    }
  }
  if (!f) throw Error("save_matrix: write failed for " + path);
}

inline ensemble::TaggedMatrix load_matrix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("load_matrix: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error("load_matrix: bad magic in " + path);
  }
  auto get32 = [&] {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get64 = [&] {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  const std::uint32_t version = get32();
  if (version != kVersion) {
    throw Error("load_matrix: unsupported version " + std::to_string(version));
  }
  const std::uint64_t rows = get64();
  const std::uint64_t cols = get64();
  const std::uint32_t tag = get32();
  if (!f) throw Error("load_matrix: truncated header in " + path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v;
      f.read(reinterpret_cast<char*>(&v), 8);
      m(i, j) = v;
    }
  }
  if (!f) throw Error("load_matrix: truncated payload in " + path);
  return {std::move(m), ensemble::MatrixTag(tag)};
}

/// CSV with full round-trip precision (hex floats would be safer but CSV files
/// here are for plotting; binary is the fidelity format).
inline void save_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream f(path);
  if (!f) throw Error("save_csv: cannot open " + path);
  f.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) f << ',';
      f << m(i, j);
    }
    f << '\n';
  }
  if (!f) throw Error("save_csv: write failed for " + path);
}

inline Eigen::MatrixXd load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("load_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error("load_csv: ragged rows in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[std::size_t(i)][std::size_t(j)];
  return m;
}

}  // namespace levyspec::io
