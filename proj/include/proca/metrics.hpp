#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "proca/tensor.hpp"

namespace proca {

/// One metrics.csv row. NaN fields render as empty cells: training rows carry
/// losses, evaluation rows carry mIoU values.
struct MetricsRow {
  int stage = 0;
  long step = 0;
  double lr = std::numeric_limits<double>::quiet_NaN();
  double loss_ce = std::numeric_limits<double>::quiet_NaN();
  double loss_contra_feat = std::numeric_limits<double>::quiet_NaN();
  double loss_contra_out = std::numeric_limits<double>::quiet_NaN();
  double loss_total = std::numeric_limits<double>::quiet_NaN();
  double miou_source = std::numeric_limits<double>::quiet_NaN();
  double miou_target = std::numeric_limits<double>::quiet_NaN();
};

inline std::string metrics_csv_header() {
  return "stage,step,lr,loss_ce,loss_contra_feat,loss_contra_out,loss_total,"
         "miou_source,miou_target";
}

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string metrics_csv_line(const MetricsRow& r) {
  std::string line = std::to_string(r.stage) + "," + std::to_string(r.step);
  for (const double v : {r.lr, r.loss_ce, r.loss_contra_feat, r.loss_contra_out, r.loss_total,
                         r.miou_source, r.miou_target})
    line += "," + format_metric(v);
  return line;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("read_metrics_csv: cannot open " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    MetricsRow row;
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
      if (ch == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += ch;
      }
    }
    cells.push_back(cell);
    if (cells.size() != 9) throw InputError("read_metrics_csv: malformed line: " + line);
    row.stage = std::stoi(cells[0]);
    row.step = std::stol(cells[1]);
    double* fields[] = {&row.lr,         &row.loss_ce,    &row.loss_contra_feat,
                        &row.loss_contra_out, &row.loss_total, &row.miou_source,
                        &row.miou_target};
    for (int i = 0; i < 7; ++i)
      if (!cells[i + 2].empty()) *fields[i] = std::stod(cells[i + 2]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace proca
