#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "latent_calib/netcore/tensor.hpp"

namespace latent_calib::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest-exact text form (%.17g) so CSV files round-trip and compare byte-for-byte.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

/// Numeric CSV with a header row.
inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Tensor2& rows) {
  if (static_cast<Eigen::Index>(header.size()) != rows.cols()) {
    throw DimensionError("CSV header width does not match data for " + path.string());
  }
  auto os = open_out(path);
  for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
  os << '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      os << (j ? "," : "") << format_double(rows(i, j));
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

struct CsvTable {
  std::vector<std::string> header;
  Tensor2 rows;
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty CSV " + path.string());
  t.header = split_line(line);
  std::vector<double> values;
  Eigen::Index n = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw IoError("ragged row " + std::to_string(n + 1) + " in " + path.string());
    }
    for (const auto& c : cells) {
      try {
        values.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw IoError("non-numeric cell '" + c + "' in " + path.string());
      }
    }
    ++n;
  }
  const auto cols = static_cast<Eigen::Index>(t.header.size());
  t.rows = Eigen::Map<Tensor2>(values.data(), n, cols);
  return t;
}

inline std::vector<std::string> numbered_header(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> h;
  for (Eigen::Index i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

inline nlohmann::json to_json(const RowVector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline RowVector row_from_json(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<RowVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace latent_calib::io
