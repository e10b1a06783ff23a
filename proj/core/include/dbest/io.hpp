#pragma once

#include "dbest/common.hpp"

#include <string>
#include <utility>
#include <vector>

namespace dbest {

// All unit ids and arms in CSV files are 1-based; the returned structures
// are 0-based. Every reader expects a header row.

struct ObservedTable {
  std::vector<int> arm_of;
  Vec y;
};

// unit_id,arm,y. Units must be exactly 1..n, in any order.
ObservedTable read_observed_csv(const std::string& path);

// unit_id,x1..xp. Empty cells and NA become NaN. Column names are returned.
Mat read_covariates_csv(const std::string& path, std::vector<std::string>* names = nullptr);

// unit_id,group_id. Group ids are relabeled 0..g-1 in order of first appearance
// after sorting by unit.
std::vector<int> read_group_csv(const std::string& path);

// src_id,dst_id.
std::vector<std::pair<int, int>> read_edges_csv(const std::string& path);

// Splits one CSV line on commas, trimming surrounding whitespace and quotes.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace dbest
