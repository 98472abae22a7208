#pragma once

// CSV ingestion, compositional (ILR) and standardization preprocessing,
// and the on-disk result bundle.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "sbss/error.hpp"
#include "sbss/estimator.hpp"
#include "sbss/linalg.hpp"
#include "sbss/matrix.hpp"
#include "sbss/metrics.hpp"

namespace sbss {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  for (auto& f : out) {
    while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace detail

/// Named coordinate and value columns read from a CSV file.
struct RawTable {
  std::vector<std::string> coord_names;
  std::vector<std::string> value_names;
  Matrix coords;  // n x d
  Matrix values;  // n x q

  std::size_t rows() const noexcept { return coords.rows(); }
  LocationSet locations() const {
    auto c = coords.data();
    return LocationSet(coords.cols(), std::vector<double>(c.begin(), c.end()));
  }
  FieldSample sample() const { return FieldSample(locations(), values); }
};

/// Reads the named columns. Empty `value_names` selects every column not
/// named as a coordinate, in file order.
inline RawTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& coord_names,
                         std::vector<std::string> value_names = {}) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file (header expected)");
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) index.emplace(header[c], c);

  if (value_names.empty()) {
    for (const auto& h : header)
      if (std::find(coord_names.begin(), coord_names.end(), h) == coord_names.end()) value_names.push_back(h);
  }
  auto locate = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw IoError(path.string() + ": missing column \"" + name + "\"");
    return it->second;
  };
  std::vector<std::size_t> coord_cols, value_cols;
  for (const auto& n : coord_names) coord_cols.push_back(locate(n));
  for (const auto& n : value_names) value_cols.push_back(locate(n));
  if (coord_cols.empty()) throw InvalidInputError("read_csv: no coordinate columns named");
  if (value_cols.empty()) throw InvalidInputError("read_csv: no value columns selected");

  std::vector<std::vector<double>> coord_rows, value_rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    auto grab = [&](const std::vector<std::size_t>& cols, const std::vector<std::string>& names) {
      std::vector<double> row;
      for (std::size_t k = 0; k < cols.size(); ++k) {
        double v;
        if (cols[k] >= fields.size() || !parse_double(fields[cols[k]], v))
          throw IoError(path.string() + ": line " + std::to_string(line_no) + ", column \"" + names[k] +
                        "\": cannot parse \"" + (cols[k] < fields.size() ? fields[cols[k]] : "") +
                        "\" as a finite number");
        row.push_back(v);
      }
      return row;
    };
    coord_rows.push_back(grab(coord_cols, coord_names));
    value_rows.push_back(grab(value_cols, value_names));
  }
  const std::size_t n = coord_rows.size();
  if (n < 2) throw InvalidInputError(path.string() + ": need at least 2 data rows, found " + std::to_string(n));

  RawTable t{coord_names, value_names, Matrix(n, coord_cols.size()), Matrix(n, value_cols.size())};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < coord_cols.size(); ++c) t.coords(i, c) = coord_rows[i][c];
    for (std::size_t c = 0; c < value_cols.size(); ++c) t.values(i, c) = value_rows[i][c];
  }
  std::map<std::vector<double>, std::size_t> seen;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = seen.emplace(coord_rows[i], i);
    if (!fresh)
      throw InvalidInputError(path.string() + ": duplicate coordinates in data rows " +
                              std::to_string(it->second + 1) + " and " + std::to_string(i + 1));
  }
  return t;
}

/// Normalized Helmert contrasts: column j (1-based, j < D) is
/// sqrt(j/(j+1)) * (1/j, ..., 1/j, -1, 0, ..., 0) with j leading entries.
inline Matrix helmert_basis(std::size_t parts) {
  if (parts < 2) throw InvalidInputError("helmert_basis: need at least 2 parts");
  Matrix v(parts, parts - 1);
  for (std::size_t j = 1; j < parts; ++j) {
    const double s = std::sqrt(static_cast<double>(j) / static_cast<double>(j + 1));
    for (std::size_t i = 0; i < j; ++i) v(i, j - 1) = s / static_cast<double>(j);
    v(j, j - 1) = -s;
  }
  return v;
}

/// Isometric log-ratio transform of strictly positive compositions (rows).
inline Matrix ilr_transform(const Matrix& compositions) {
  const std::size_t n = compositions.rows(), parts = compositions.cols();
  const Matrix v = helmert_basis(parts);
  Matrix logs(n, parts);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < parts; ++j) {
      const double x = compositions(i, j);
      if (!(x > 0.0) || !std::isfinite(x))
        throw InvalidInputError("ilr_transform: non-positive entry at row " + std::to_string(i + 1) +
                                ", part " + std::to_string(j + 1));
      logs(i, j) = std::log(x);
    }
  }
  return logs * v;
}

/// x -> S^{-1/2} (x - mean) with the n^{-1} covariance convention.
inline FieldSample standardize(const FieldSample& data) {
  const FieldSample c = center(data);
  const SymMatrix s = sample_cov(c);
  SymMatrix inv_sqrt;
  try {
    inv_sqrt = spd_inv_sqrt(s);
  } catch (const NotPositiveDefiniteError& e) {
    throw NotPositiveDefiniteError(std::string("standardize: singular covariance (") + e.what() + ")",
                                   e.eigenvalue());
  }
  Matrix z = c.values() * inv_sqrt.matrix();
  return FieldSample(data.locations(), std::move(z));
}

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                             const std::vector<std::string>& header = {}) {
  auto out = detail::open_out(path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  if (!header.empty()) out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Headerless numeric CSV.
inline Matrix read_matrix_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> r;
    for (const auto& f : detail::split_csv_line(line)) {
      double v;
      if (!parse_double(f, v))
        throw IoError(path.string() + ": line " + std::to_string(line_no) + ": cannot parse \"" + f + "\"");
      r.push_back(v);
    }
    if (!rows.empty() && r.size() != rows.front().size())
      throw IoError(path.string() + ": line " + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(r));
  }
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

/// Estimate summary, IC scores with coordinates, and run metadata.
struct ResultBundle {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> lambda_hat;
  Matrix omega_hat;
  Matrix gamma_hat;
  std::vector<std::string> coord_names;
  Matrix coords;  // n x d
  Matrix scores;  // n x p
  nlohmann::json meta = nlohmann::json::object();
};

inline ResultBundle make_bundle(const BssEstimate& est, const FieldSample& data,
                                std::vector<std::string> coord_names, nlohmann::json meta) {
  ResultBundle b;
  b.n = data.sites();
  b.p = data.variables();
  b.lambda_hat = est.lambda_hat;
  b.omega_hat = est.omega_hat;
  b.gamma_hat = est.gamma_hat;
  const auto& locs = data.locations();
  if (coord_names.size() != locs.dim()) {
    coord_names.clear();
    for (std::size_t k = 0; k < locs.dim(); ++k) coord_names.push_back("s" + std::to_string(k + 1));
  }
  b.coord_names = std::move(coord_names);
  b.coords = Matrix(locs.size(), locs.dim());
  for (std::size_t i = 0; i < locs.size(); ++i)
    for (std::size_t k = 0; k < locs.dim(); ++k) b.coords(i, k) = locs.point(i)[k];
  b.scores = ic_scores(est, data);
  b.meta = std::move(meta);
  return b;
}

/// FNV-1a of a string, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Timestamp for meta.json: SOURCE_DATE_EPOCH when set, otherwise null so
/// that repeated runs stay byte-identical.
inline nlohmann::json run_timestamp() {
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH"); e && *e) return std::string(e);
  return nullptr;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

/// Writes eigenvalues.csv, omega_hat.csv, gamma_hat.csv, scores.csv and
/// meta.json into `dir` and returns the paths written.
inline std::vector<std::filesystem::path> write_results(const ResultBundle& b, const std::filesystem::path& dir) {
  if (b.lambda_hat.size() != b.p || b.omega_hat.rows() != b.p || b.omega_hat.cols() != b.p ||
      b.gamma_hat.rows() != b.p || b.gamma_hat.cols() != b.p || b.scores.rows() != b.n ||
      b.scores.cols() != b.p || b.coords.rows() != b.n)
    throw InvalidInputError("write_results: bundle dimensions inconsistent with n, p");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> manifest;
  {
    const auto path = dir / "eigenvalues.csv";
    auto out = detail::open_out(path);
    out << "index,lambda_hat,gap\n";
    for (std::size_t i = 0; i < b.p; ++i) {
      out << (i + 1) << ',' << format_double(b.lambda_hat[i]) << ',';
      if (i > 0) out << format_double(b.lambda_hat[i - 1] - b.lambda_hat[i]);
      out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
    manifest.push_back(path);
  }
  write_matrix_csv(dir / "omega_hat.csv", b.omega_hat);
  manifest.push_back(dir / "omega_hat.csv");
  write_matrix_csv(dir / "gamma_hat.csv", b.gamma_hat);
  manifest.push_back(dir / "gamma_hat.csv");
  {
    Matrix joined(b.n, b.coords.cols() + b.p);
    std::vector<std::string> header = b.coord_names;
    for (std::size_t j = 0; j < b.p; ++j) header.push_back("ic" + std::to_string(j + 1));
    for (std::size_t i = 0; i < b.n; ++i) {
      for (std::size_t k = 0; k < b.coords.cols(); ++k) joined(i, k) = b.coords(i, k);
      for (std::size_t j = 0; j < b.p; ++j) joined(i, b.coords.cols() + j) = b.scores(i, j);
    }
    write_matrix_csv(dir / "scores.csv", joined, header);
    manifest.push_back(dir / "scores.csv");
  }
  nlohmann::json meta = b.meta;
  meta["n"] = b.n;
  meta["p"] = b.p;
  write_json(dir / "meta.json", meta);
  manifest.push_back(dir / "meta.json");
  return manifest;
}

/// Reads a bundle written by write_results.
inline ResultBundle read_results(const std::filesystem::path& dir) {
  ResultBundle b;
  b.meta = read_json(dir / "meta.json");
  {
    auto in = detail::open_in(dir / "eigenvalues.csv");
    std::string line;
    std::getline(in, line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = detail::split_csv_line(line);
      double v;
      if (f.size() < 2 || !parse_double(f[1], v))
        throw IoError((dir / "eigenvalues.csv").string() + ": malformed line " + std::to_string(line_no));
      b.lambda_hat.push_back(v);
    }
  }
  b.p = b.lambda_hat.size();
  b.omega_hat = read_matrix_csv(dir / "omega_hat.csv");
  b.gamma_hat = read_matrix_csv(dir / "gamma_hat.csv");
  if (b.omega_hat.rows() != b.p || b.omega_hat.cols() != b.p || b.gamma_hat.rows() != b.p ||
      b.gamma_hat.cols() != b.p)
    throw IoError(dir.string() + ": omega_hat/gamma_hat dimensions disagree with eigenvalues.csv");
  if (b.meta.contains("n") && b.meta["n"].is_number_unsigned()) b.n = b.meta["n"].get<std::size_t>();
  if (std::filesystem::exists(dir / "scores.csv")) {
    auto in = detail::open_in(dir / "scores.csv");
    std::string line;
    std::getline(in, line);
    const auto header = detail::split_csv_line(line);
    if (header.size() < b.p) throw IoError((dir / "scores.csv").string() + ": too few columns");
    const std::size_t d = header.size() - b.p;
    b.coord_names.assign(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(d));
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<double> r;
      for (const auto& f : detail::split_csv_line(line)) {
        double v;
        if (!parse_double(f, v)) throw IoError((dir / "scores.csv").string() + ": cannot parse \"" + f + "\"");
        r.push_back(v);
      }
      if (r.size() != header.size()) throw IoError((dir / "scores.csv").string() + ": ragged row");
      rows.push_back(std::move(r));
    }
    b.coords = Matrix(rows.size(), d);
    b.scores = Matrix(rows.size(), b.p);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t k = 0; k < d; ++k) b.coords(i, k) = rows[i][k];
      for (std::size_t j = 0; j < b.p; ++j) b.scores(i, j) = rows[i][d + j];
    }
    b.n = rows.size();
  }
  return b;
}

}  // namespace sbss
