#include "aff/token_csv.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace aff {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void write_token_csv(const std::string& path, const std::vector<TokenRecord>& records) {
  std::ofstream f(path);
  check(f.good(), "write_token_csv: cannot open " + path);
  f << "stage,x,y,g,s,reserved,selected\n";
  for (const TokenRecord& r : records)
    f << r.stage << "," << format_real(r.x) << "," << format_real(r.y) << "," << r.g << ","
      << format_real(r.s) << "," << r.reserved << "," << r.selected << "\n";
  check(f.good(), "write_token_csv: write failed for " + path);
}

std::vector<TokenRecord> read_token_csv(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "read_token_csv: cannot open " + path);
  std::string line;
  check(static_cast<bool>(std::getline(f, line)), "read_token_csv: empty file " + path);
  check(line == "stage,x,y,g,s,reserved,selected", "read_token_csv: unexpected header '" + line + "'");
  std::vector<TokenRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    check(fields.size() == 7, "read_token_csv: expected 7 fields, got line '" + line + "'");
    TokenRecord r;
    r.stage = std::stoi(fields[0]);
    r.x = std::stod(fields[1]);
    r.y = std::stod(fields[2]);
    r.g = std::stoi(fields[3]);
    r.s = std::stod(fields[4]);
    r.reserved = std::stoi(fields[5]);
    r.selected = std::stoi(fields[6]);
    out.push_back(r);
  }
  return out;
}

void write_cluster_csv(const std::string& path, const std::vector<Vec2>& positions,
                       const ClusterAssignment& assignment) {
  std::ofstream f(path);
  check(f.good(), "write_cluster_csv: cannot open " + path);
  f << "token_index,x,y,cluster_id\n";
  for (std::size_t i = 0; i < positions.size(); ++i)
    f << i << "," << format_real(positions[i].x) << "," << format_real(positions[i].y) << ","
      << assignment.cluster_of[i] << "\n";
  check(f.good(), "write_cluster_csv: write failed for " + path);
}

std::vector<Vec2> read_positions_csv(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "read_positions_csv: cannot open " + path);
  std::string line;
  check(static_cast<bool>(std::getline(f, line)), "read_positions_csv: empty file " + path);
  const auto header = split_csv_line(line);
  std::size_t xi = header.size(), yi = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "x") xi = i;
    if (header[i] == "y") yi = i;
  }
  check(xi < header.size() && yi < header.size(),
        "read_positions_csv: header must contain x and y columns");
  std::vector<Vec2> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    check(fields.size() >= header.size(), "read_positions_csv: short row '" + line + "'");
    out.push_back({std::stod(fields[xi]), std::stod(fields[yi])});
  }
  return out;
}

void write_metrics_csv(const std::string& path, const std::vector<std::array<double, 4>>& rows) {
  std::ofstream f(path);
  check(f.good(), "write_metrics_csv: cannot open " + path);
  f << "epoch,loss,acc,focus_ratio\n";
  for (const auto& r : rows)
    f << static_cast<long long>(r[0]) << "," << format_real(r[1]) << "," << format_real(r[2]) << ","
      << format_real(r[3]) << "\n";
  check(f.good(), "write_metrics_csv: write failed for " + path);
}

}  // namespace aff
