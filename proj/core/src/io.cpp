#include "dbest/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace dbest {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  auto flush = [&]() {
    const auto b = cell.find_first_not_of(" \t\r\"");
    const auto e = cell.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    cell.clear();
  };
  for (char ch : line) {
    if (ch == ',')
      flush();
    else
      cell.push_back(ch);
  }
  flush();
  return out;
}

namespace {

struct CsvRows {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_no;
};

CsvRows read_rows(const std::string& path, std::size_t min_columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  CsvRows t;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      if (t.header.size() < min_columns)
        throw std::runtime_error(path + ": header needs at least " + std::to_string(min_columns) + " columns");
      continue;
    }
    if (cells.size() != t.header.size())
      throw std::runtime_error(path + ":" + std::to_string(no) + ": expected " + std::to_string(t.header.size()) +
                               " fields");
    t.rows.push_back(std::move(cells));
    t.line_no.push_back(no);
  }
  if (t.header.empty()) throw std::runtime_error(path + ": empty file");
  return t;
}

long parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::runtime_error(where + ": '" + s + "' is not an integer");
  return v;
}

double parse_double(const std::string& s, const std::string& where, bool allow_missing) {
  if (allow_missing && (s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan"))
    return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::runtime_error(where + ": '" + s + "' is not a number");
  return v;
}

std::string where(const std::string& path, int line) { return path + ":" + std::to_string(line); }

// Maps 1-based unit ids to row positions; requires ids to be exactly 1..n.
std::vector<std::size_t> unit_order(const CsvRows& t, const std::string& path) {
  const std::size_t n = t.rows.size();
  std::vector<std::size_t> row_of(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const long id = parse_int(t.rows[r][0], where(path, t.line_no[r]));
    if (id < 1 || static_cast<std::size_t>(id) > n)
      throw std::runtime_error(where(path, t.line_no[r]) + ": unit id out of range 1.." + std::to_string(n));
    if (row_of[id - 1] != n) throw std::runtime_error(where(path, t.line_no[r]) + ": duplicate unit id");
    row_of[id - 1] = r;
  }
  return row_of;
}

}  // namespace

ObservedTable read_observed_csv(const std::string& path) {
  const auto t = read_rows(path, 3);
  const auto order = unit_order(t, path);
  ObservedTable out;
  out.arm_of.resize(order.size());
  out.y.resize(static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& row = t.rows[order[i]];
    const auto at = where(path, t.line_no[order[i]]);
    const long arm = parse_int(row[1], at);
    if (arm < 1) throw std::runtime_error(at + ": arms are 1-based");
    out.arm_of[i] = static_cast<int>(arm - 1);
    out.y(static_cast<Eigen::Index>(i)) = parse_double(row[2], at, false);
  }
  return out;
}

Mat read_covariates_csv(const std::string& path, std::vector<std::string>* names) {
  const auto t = read_rows(path, 1);
  const auto order = unit_order(t, path);
  const Eigen::Index p = static_cast<Eigen::Index>(t.header.size()) - 1;
  Mat X(static_cast<Eigen::Index>(order.size()), p);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& row = t.rows[order[i]];
    for (Eigen::Index j = 0; j < p; ++j)
      X(static_cast<Eigen::Index>(i), j) = parse_double(row[j + 1], where(path, t.line_no[order[i]]), true);
  }
  if (names) names->assign(t.header.begin() + 1, t.header.end());
  return X;
}

std::vector<int> read_group_csv(const std::string& path) {
  const auto t = read_rows(path, 2);
  const auto order = unit_order(t, path);
  std::map<std::string, int> label;
  std::vector<int> group_of(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& key = t.rows[order[i]][1];
    if (key.empty()) throw std::runtime_error(where(path, t.line_no[order[i]]) + ": empty group id");
    auto it = label.emplace(key, static_cast<int>(label.size())).first;
    group_of[i] = it->second;
  }
  return group_of;
}

std::vector<std::pair<int, int>> read_edges_csv(const std::string& path) {
  const auto t = read_rows(path, 2);
  std::vector<std::pair<int, int>> edges;
  edges.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto at = where(path, t.line_no[r]);
    const long s = parse_int(t.rows[r][0], at), d = parse_int(t.rows[r][1], at);
    if (s < 1 || d < 1) throw std::runtime_error(at + ": unit ids are 1-based");
    edges.emplace_back(static_cast<int>(s - 1), static_cast<int>(d - 1));
  }
  return edges;
}

}  // namespace dbest
