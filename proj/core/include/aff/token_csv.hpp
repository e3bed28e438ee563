#pragma once

#include <array>
#include <string>
#include <vector>

#include "aff/clustering.hpp"
#include "aff/tensor.hpp"

namespace aff {

struct TokenRecord {
  int stage = 1;
  double x = 0.0;
  double y = 0.0;
  int g = 0;
  double s = 0.0;
  int reserved = 0;
  int selected = 0;
};

/// Fixed schema `stage,x,y,g,s,reserved,selected`; reals at 6 decimals.
void write_token_csv(const std::string& path, const std::vector<TokenRecord>& records);
std::vector<TokenRecord> read_token_csv(const std::string& path);

/// `token_index,x,y,cluster_id`.
void write_cluster_csv(const std::string& path, const std::vector<Vec2>& positions,
                       const ClusterAssignment& assignment);

/// Positions from a CSV with an `x,y` header (extra columns ignored).
std::vector<Vec2> read_positions_csv(const std::string& path);

/// `epoch,loss,acc,focus_ratio`.
void write_metrics_csv(const std::string& path, const std::vector<std::array<double, 4>>& rows);

std::string format_real(double v);  // 6 decimal places

}  // namespace aff
