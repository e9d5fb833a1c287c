#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "himo/harness/harness.hpp"
#include "himo/learning.hpp"

namespace himo {

namespace {

namespace fs = std::filesystem;

struct TraceFile {
  std::string run_label;                 // the seed_*/repeat_* directory name
  std::vector<std::string> columns;      // from the header row
  std::map<long, std::vector<double>> rows;  // step -> values per column
};

bool read_trace(const fs::path& path, TraceFile& out) {
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string tok;
    while (std::getline(row, tok, ',')) cells.push_back(tok);
    if (!have_header) {
      out.columns = cells;
      have_header = true;
      continue;
    }
    if (cells.size() != out.columns.size()) return false;
    std::vector<double> vals(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      try {
        vals[i] = std::stod(cells[i]);
      } catch (...) {
        vals[i] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    const long step = static_cast<long>(vals[0]);
    out.rows[step] = std::move(vals);
  }
  return have_header;
}

double percentile_sorted(std::vector<double>& v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

int export_curves(const std::string& out_dir, bool quiet) {
  const fs::path root(out_dir);
  if (!fs::exists(root)) {
    std::cerr << "export: " << out_dir << " does not exist\n";
    return 3;
  }

  // arm = path from out_dir to the run directory's parent
  std::map<std::string, std::vector<TraceFile>> arms;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().filename() != "metrics.csv") continue;
    const fs::path run_dir = entry.path().parent_path();
    const fs::path arm_path = fs::relative(run_dir.parent_path(), root);
    TraceFile trace;
    trace.run_label = run_dir.filename().string();
    if (!read_trace(entry.path(), trace)) {
      std::cerr << "export: skipping malformed " << entry.path().string() << "\n";
      continue;
    }
    arms[arm_path.generic_string()].push_back(std::move(trace));
  }
  if (arms.empty()) {
    std::cerr << "export: no metrics.csv files under " << out_dir << "\n";
    return 3;
  }

  std::ofstream out(root / "curves.csv", std::ios::binary | std::ios::trunc);
  out << "arm,step,column,mean,median,min,max,n_runs\n";

  for (auto& [arm, traces] : arms) {
    // inner join on step
    std::set<long> steps;
    for (const auto& [step, _] : traces.front().rows) steps.insert(step);
    for (std::size_t i = 1; i < traces.size(); ++i) {
      std::set<long> keep;
      for (const long s : steps)
        if (traces[i].rows.count(s)) keep.insert(s);
      if (keep.size() != steps.size() || traces[i].rows.size() != keep.size()) {
        if (!quiet)
          std::cerr << "export: warning: step grids differ across runs of " << arm
                    << "; using the inner join\n";
      }
      steps = std::move(keep);
    }

    const std::vector<std::string>& columns = traces.front().columns;
    for (const long step : steps) {
      for (std::size_t c = 1; c < columns.size(); ++c) {
        if (columns[c] == "seed") continue;
        std::vector<double> vals;
        vals.reserve(traces.size());
        for (const TraceFile& t : traces) {
          const double v = t.rows.at(step)[c];
          if (!std::isnan(v)) vals.push_back(v);
        }
        if (vals.empty()) continue;
        double sum = 0.0;
        for (const double v : vals) sum += v;
        std::vector<double> sorted = vals;
        const double med = percentile_sorted(sorted, 0.5);
        out << arm << ',' << step << ',' << columns[c] << ','
            << format_double(sum / static_cast<double>(vals.size())) << ','
            << format_double(med) << ',' << format_double(sorted.front()) << ','
            << format_double(sorted.back()) << ',' << vals.size() << '\n';
      }
    }
  }
  if (!quiet) std::cerr << "export: wrote " << (root / "curves.csv").string() << "\n";
  return 0;
}

}  // namespace himo
