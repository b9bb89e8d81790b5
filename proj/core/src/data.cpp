#include "stwarp/data.hpp"

#include "stwarp/errors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace stwarp {
namespace {

struct PointHash {
  std::size_t operator()(const SpaceTimePoint& p) const noexcept {
    std::uint64_t h = std::bit_cast<std::uint64_t>(p.s1);
    h ^= std::bit_cast<std::uint64_t>(p.s2) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::bit_cast<std::uint64_t>(p.t) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, std::string_view column, std::size_t line) {
  double value = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (cell.empty() || ec != std::errc() || ptr != end) {
    throw DataError("non-numeric value '" + std::string(cell) + "' in column '" +
                        std::string(column) + "'",
                    line);
  }
  return value;
}

bool is_covariate_name(std::string_view name, int* number) {
  if (name.size() < 2 || name.front() != 'x') return false;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), value);
  if (ec != std::errc() || ptr != name.data() + name.size() || value < 1) return false;
  *number = value;
  return true;
}

}  // namespace

void Dataset::validate() const {
  const auto n = points.size();
  if (z.size() != 0 && static_cast<std::size_t>(z.size()) != n)
    throw DataError("response length " + std::to_string(z.size()) + " does not match " +
                    std::to_string(n) + " points");
  if (x.cols() > 0 && static_cast<std::size_t>(x.rows()) != n)
    throw DataError("covariate matrix has " + std::to_string(x.rows()) + " rows for " +
                    std::to_string(n) + " points");
  if (!covariate_names.empty() && covariate_names.size() != static_cast<std::size_t>(x.cols()))
    throw DataError("covariate name count does not match covariate columns");
  std::unordered_set<SpaceTimePoint, PointHash> seen;
  seen.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.s1) || !std::isfinite(p.s2) || !std::isfinite(p.t))
      throw DataError("non-finite coordinate at row " + std::to_string(i + 1));
    if (!seen.insert(p).second)
      throw DataError("duplicate coordinates at row " + std::to_string(i + 1));
  }
}

Dataset make_dataset(std::vector<SpaceTimePoint> points, Eigen::VectorXd z, Eigen::MatrixXd x,
                     std::vector<std::string> covariate_names) {
  Dataset d;
  const auto n = static_cast<Eigen::Index>(points.size());
  d.points = std::move(points);
  d.z = std::move(z);
  d.x = x.size() == 0 ? Eigen::MatrixXd(n, 0) : std::move(x);
  if (covariate_names.empty())
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) covariate_names.push_back("x" + std::to_string(j + 1));
  d.covariate_names = std::move(covariate_names);
  d.validate();
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path.string());

  std::string header;
  if (!std::getline(in, header)) throw DataError("empty data file " + path.string());
  const auto columns = split_line(header, schema.delimiter);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < columns.size(); ++j) index.emplace(std::string(columns[j]), j);

  auto require = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw DataError("missing column '" + name + "' in " + path.string(), 1);
    return it->second;
  };
  const auto c_s1 = require(schema.s1);
  const auto c_s2 = require(schema.s2);
  const auto c_t = require(schema.t);
  std::optional<std::size_t> c_z;
  if (index.contains(schema.z))
    c_z = index.at(schema.z);
  else if (schema.require_response)
    require(schema.z);

  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    std::vector<std::pair<int, std::string>> found;
    for (const auto& col : columns) {
      int number = 0;
      if (is_covariate_name(col, &number)) found.emplace_back(number, std::string(col));
    }
    std::sort(found.begin(), found.end());
    for (auto& [_, name] : found) cov_names.push_back(name);
  }
  std::vector<std::size_t> c_x;
  for (const auto& name : cov_names) c_x.push_back(require(name));

  std::vector<SpaceTimePoint> pts;
  std::vector<double> zs;
  std::vector<double> xs;
  std::unordered_set<SpaceTimePoint, PointHash> seen;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line, schema.delimiter);
    if (cells.size() != columns.size())
      throw DataError("expected " + std::to_string(columns.size()) + " fields, found " +
                          std::to_string(cells.size()),
                      line_no);
    SpaceTimePoint p{parse_cell(cells[c_s1], schema.s1, line_no),
                     parse_cell(cells[c_s2], schema.s2, line_no),
                     parse_cell(cells[c_t], schema.t, line_no)};
    if (!std::isfinite(p.s1) || !std::isfinite(p.s2) || !std::isfinite(p.t))
      throw DataError("non-finite coordinate", line_no);
    if (!seen.insert(p).second) throw DataError("duplicate coordinates", line_no);
    pts.push_back(p);
    if (c_z) zs.push_back(parse_cell(cells[*c_z], schema.z, line_no));
    for (std::size_t j = 0; j < c_x.size(); ++j)
      xs.push_back(parse_cell(cells[c_x[j]], cov_names[j], line_no));
  }

  const auto n = static_cast<Eigen::Index>(pts.size());
  const auto q = static_cast<Eigen::Index>(c_x.size());
  Dataset d;
  d.points = std::move(pts);
  d.z = c_z ? Eigen::Map<Eigen::VectorXd>(zs.data(), n) : Eigen::VectorXd();
  d.x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, q);
  d.covariate_names = std::move(cov_names);
  return d;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void save_dataset(const std::filesystem::path& path, const Dataset& data, char delimiter) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "s1" << delimiter << "s2" << delimiter << "t";
  if (data.z.size() > 0) out << delimiter << "z";
  for (const auto& name : data.covariate_names) out << delimiter << name;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& p = data.points[i];
    out << format_double(p.s1) << delimiter << format_double(p.s2) << delimiter << format_double(p.t);
    if (data.z.size() > 0) out << delimiter << format_double(data.z[static_cast<Eigen::Index>(i)]);
    for (Eigen::Index j = 0; j < data.x.cols(); ++j)
      out << delimiter << format_double(data.x(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.points.reserve(rows.size());
  out.z.resize(data.z.size() > 0 ? n : 0);
  out.x.resize(n, data.x.cols());
  out.covariate_names = data.covariate_names;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto r = rows[static_cast<std::size_t>(k)];
    out.points.push_back(data.points[r]);
    if (data.z.size() > 0) out.z[k] = data.z[static_cast<Eigen::Index>(r)];
    if (data.x.cols() > 0) out.x.row(k) = data.x.row(static_cast<Eigen::Index>(r));
  }
  return out;
}

std::pair<Dataset, Dataset> split_train_validation(const Dataset& data, double fraction,
                                                   std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw DataError("train fraction must lie in (0, 1), got " + format_double(fraction));
  const auto n = data.size();
  if (n < 2) throw DataError("need at least two rows to split");
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the partition does not depend on
  // the standard library's shuffle.
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> valid(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(valid.begin(), valid.end());
  return {subset(data, train), subset(data, valid)};
}

}  // namespace stwarp
