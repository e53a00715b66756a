#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vnhc/errors.hpp"
#include "vnhc/integrate.hpp"

namespace vnhc {

/// Shortest 17-significant-digit rendering; round-trips every double exactly.
inline std::string format_float(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Writes the trajectory as CSV with the fixed column layout
///   t, q0..q{n-1}, v0..v{n-1}, phi0..phi{m-1}, u0..u{k-1}, energy
/// plus lambda0..lambda{m-1} when multipliers are passed (constrained runs).
inline void write_trajectory_csv(
    const std::filesystem::path& path, const TrajectoryRecord& tr,
    const std::vector<Eigen::VectorXd>* multipliers = nullptr) {
  if (tr.samples() == 0)
    throw ValidationError("write_trajectory_csv: empty trajectory");
  if (multipliers && multipliers->size() != tr.samples())
    throw DimensionError("write_trajectory_csv: multiplier count does not "
                         "match sample count");
  const Eigen::Index n = tr.states.front().q.size();
  const Eigen::Index phis = tr.constraint_values.front().size();
  const Eigen::Index us = tr.controls.front().size();
  const Eigen::Index lambdas =
      multipliers ? multipliers->front().size() : Eigen::Index(0);

  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ValidationError("write_trajectory_csv: cannot open " +
                          path.string());
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",q" << i;
  for (Eigen::Index i = 0; i < n; ++i) out << ",v" << i;
  for (Eigen::Index i = 0; i < phis; ++i) out << ",phi" << i;
  for (Eigen::Index i = 0; i < us; ++i) out << ",u" << i;
  out << ",energy";
  for (Eigen::Index i = 0; i < lambdas; ++i) out << ",lambda" << i;
  out << "\n";

  for (size_t row = 0; row < tr.samples(); ++row) {
    out << format_float(tr.times[row]);
    const State& s = tr.states[row];
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_float(s.q[i]);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_float(s.v[i]);
    for (Eigen::Index i = 0; i < phis; ++i)
      out << ',' << format_float(tr.constraint_values[row][i]);
    for (Eigen::Index i = 0; i < us; ++i)
      out << ',' << format_float(tr.controls[row][i]);
    out << ',' << format_float(tr.energies[row]);
    if (multipliers)
      for (Eigen::Index i = 0; i < lambdas; ++i)
        out << ',' << format_float((*multipliers)[row][i]);
    out << "\n";
  }
  if (!out)
    throw ValidationError("write_trajectory_csv: write to " + path.string() +
                          " failed");
}

struct ReadTrajectory {
  TrajectoryRecord record;
  std::vector<Eigen::VectorXd> multipliers;  ///< empty unless lambda columns
  int n = 0;
  int phi_count = 0;
  int u_count = 0;
};

namespace detail {

inline double parse_float_field(const std::string& field, int line) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (end == begin || (end && *end != '\0'))
    throw ParseError("bad numeric field '" + field + "'", line, 1);
  return x;
}

}  // namespace detail

/// Reads files produced by write_trajectory_csv, recovering the exact doubles.
inline ReadTrajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("read_trajectory_csv: cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header))
    throw ParseError("missing header row", 1, 1);

  std::vector<std::string> columns;
  {
    std::stringstream ss(header);
    std::string field;
    while (std::getline(ss, field, ',')) columns.push_back(field);
  }
  auto count_prefix = [&](const std::string& prefix) {
    int k = 0;
    for (const auto& c : columns)
      if (c.rfind(prefix, 0) == 0 &&
          c.size() > prefix.size() &&
          std::isdigit(static_cast<unsigned char>(c[prefix.size()])))
        ++k;
    return k;
  };
  ReadTrajectory out;
  out.n = count_prefix("q");
  out.phi_count = count_prefix("phi");
  out.u_count = count_prefix("u");
  const int lambda_count = count_prefix("lambda");
  const size_t expected =
      1 + 2 * static_cast<size_t>(out.n) + static_cast<size_t>(out.phi_count) +
      static_cast<size_t>(out.u_count) + 1 + static_cast<size_t>(lambda_count);
  if (columns.empty() || columns.front() != "t" ||
      columns.size() != expected)
    throw ParseError("unexpected column layout '" + header + "'", 1, 1);

  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> row;
    while (std::getline(ss, field, ','))
      row.push_back(detail::parse_float_field(field, lineno));
    if (row.size() != expected)
      throw ParseError("row has " + std::to_string(row.size()) +
                           " fields, expected " + std::to_string(expected),
                       lineno, 1);
    size_t at = 0;
    State s;
    s.t = row[at++];
    s.q = Eigen::Map<Eigen::VectorXd>(row.data() + at, out.n);
    at += static_cast<size_t>(out.n);
    s.v = Eigen::Map<Eigen::VectorXd>(row.data() + at, out.n);
    at += static_cast<size_t>(out.n);
    Eigen::VectorXd phi =
        Eigen::Map<Eigen::VectorXd>(row.data() + at, out.phi_count);
    at += static_cast<size_t>(out.phi_count);
    Eigen::VectorXd u = Eigen::Map<Eigen::VectorXd>(row.data() + at, out.u_count);
    at += static_cast<size_t>(out.u_count);
    const double e = row[at++];
    out.record.times.push_back(s.t);
    out.record.states.push_back(std::move(s));
    out.record.constraint_values.push_back(std::move(phi));
    out.record.controls.push_back(std::move(u));
    out.record.energies.push_back(e);
    if (lambda_count) {
      out.multipliers.push_back(
          Eigen::Map<Eigen::VectorXd>(row.data() + at, lambda_count));
    }
  }
  if (out.record.samples() == 0)
    throw ParseError("no data rows", lineno, 1);
  out.record.dt = out.record.samples() > 1
                      ? out.record.times[1] - out.record.times[0]
                      : 0.0;
  return out;
}

/// Key figures of a run, written as plain `key: value` lines.
struct RunSummary {
  std::string scenario;
  std::string mode;
  size_t samples = 0;
  double dt = 0.0;
  double t_final = 0.0;
  std::vector<std::optional<double>> decay_rates;
  double max_abs_phi = 0.0;
  double final_energy = 0.0;
  double coupling_condition_min = 0.0;
  double coupling_condition_max = 0.0;
};

inline void write_summary(const std::filesystem::path& path,
                          const RunSummary& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ValidationError("write_summary: cannot open " + path.string());
  out << "scenario: " << s.scenario << "\n";
  out << "mode: " << s.mode << "\n";
  out << "samples: " << s.samples << "\n";
  out << "dt: " << format_float(s.dt) << "\n";
  out << "t_final: " << format_float(s.t_final) << "\n";
  for (size_t b = 0; b < s.decay_rates.size(); ++b) {
    out << "decay_rate[" << b << "]: ";
    if (s.decay_rates[b])
      out << format_float(*s.decay_rates[b]);
    else
      out << "n/a";
    out << "\n";
  }
  out << "max_abs_phi: " << format_float(s.max_abs_phi) << "\n";
  out << "final_energy: " << format_float(s.final_energy) << "\n";
  out << "coupling_condition_min: " << format_float(s.coupling_condition_min)
      << "\n";
  out << "coupling_condition_max: " << format_float(s.coupling_condition_max)
      << "\n";
  if (!out)
    throw ValidationError("write_summary: write to " + path.string() +
                          " failed");
}

}  // namespace vnhc
