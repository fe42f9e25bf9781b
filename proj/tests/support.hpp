#pragma once

// Helpers shared by the CLI tests and the acceptance runner.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace testsupport {

/// Exit status of a shell command (-1 if it did not exit normally).
inline int run(const std::string& cmd) {
  const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
  if (st == -1 || !WIFEXITED(st)) return -1;
  return WEXITSTATUS(st);
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("no column " + name);
  }
  std::vector<double> numbers(const std::string& name) const {
    const std::size_t c = col(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(std::stod(r.at(c)));
    return out;
  }
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline Csv read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  Csv c;
  std::string line;
  std::getline(in, line);
  c.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) c.rows.push_back(split(line));
  return c;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ShapeCheck {
  double kink = 0.0;
  double fraction = 0.0;  // share of cells with the stop-loss slope on their side of the kink
  std::size_t cells = 0;
};

/// Two-slope check on a sampled map: flat (slope <= flat_tol) below a kink and slope
/// >= steep_min above it. The kink is the split that maximises the share of matching cells;
/// cells of zero width (atoms) are skipped.
inline ShapeCheck stop_loss_shape(const std::vector<double>& x, const std::vector<double>& y,
                                  double flat_tol = 1e-3, double steep_min = 0.99) {
  std::vector<double> xs, slope;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double dx = x[i + 1] - x[i];
    if (dx <= 1e-12) continue;
    xs.push_back(x[i]);
    slope.push_back((y[i + 1] - y[i]) / dx);
  }
  ShapeCheck best;
  best.cells = slope.size();
  if (slope.empty()) return best;
  // prefix count of flat cells, suffix count of steep cells
  std::vector<std::size_t> flat(slope.size() + 1, 0), steep(slope.size() + 1, 0);
  for (std::size_t i = 0; i < slope.size(); ++i) flat[i + 1] = flat[i] + (slope[i] <= flat_tol ? 1 : 0);
  for (std::size_t i = slope.size(); i-- > 0;) steep[i] = steep[i + 1] + (slope[i] >= steep_min ? 1 : 0);
  for (std::size_t k = 1; k < slope.size(); ++k) {  // at least one cell on each side
    const double f = static_cast<double>(flat[k] + steep[k]) / static_cast<double>(slope.size());
    if (f > best.fraction) {
      best.fraction = f;
      best.kink = k < xs.size() ? xs[k] : x.back();
    }
  }
  return best;
}

}  // namespace testsupport
