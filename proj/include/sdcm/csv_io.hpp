#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sdcm/errors.hpp"
#include "sdcm/types.hpp"

namespace sdcm {

/// Shortest round-trip decimal representation of a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& tok, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw io_error("CSV parse error: bad number '" + tok + "' in " + context);
  return v;
}

}  // namespace detail

/// Reads one series from the `t_s,y[,u_ref]` schema. The sample interval is
/// inferred from the first gap and the whole series is validated against it.
inline TimeSeries read_series_csv(const std::filesystem::path& path,
                                  const std::string& series_id = "") {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty file '" + path.string() + "'");
  auto header = detail::split_csv_line(line);
  bool with_ref = false;
  if (header.size() == 3 && header[0] == "t_s" && header[1] == "y" && header[2] == "u_ref")
    with_ref = true;
  else if (!(header.size() == 2 && header[0] == "t_s" && header[1] == "y"))
    throw io_error("unexpected CSV header in '" + path.string() +
                   "' (want t_s,y[,u_ref], got '" + line + "')");

  TimeSeries s;
  s.series_id = series_id.empty() ? path.stem().string() : series_id;
  if (with_ref) s.u_ref.emplace();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw io_error("CSV row " + std::to_string(lineno) + " in '" + path.string() +
                     "' has " + std::to_string(cells.size()) + " cells");
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    s.t.push_back(detail::parse_double(cells[0], ctx));
    s.y.push_back(detail::parse_double(cells[1], ctx));
    if (with_ref) s.u_ref->push_back(detail::parse_double(cells[2], ctx));
  }
  s.sample_interval = s.t.size() >= 2 ? s.t[1] - s.t[0] : 0.0;
  validate(s);
  return s;
}

inline void write_series_csv(const std::filesystem::path& path, const TimeSeries& s) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << (s.u_ref ? "t_s,y,u_ref\n" : "t_s,y\n");
  for (std::size_t k = 0; k < s.size(); ++k) {
    out << format_double(s.t[k]) << ',' << format_double(s.y[k]);
    if (s.u_ref) out << ',' << format_double((*s.u_ref)[k]);
    out << '\n';
  }
  if (!out) throw io_error("write failed for '" + path.string() + "'");
}

/// One per-query output row of the predict command.
struct EstimateRow {
  long k = 0;
  double t_s = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double gamma = 0.0;
};

/// `# key: value` metadata comments, then `k,t_s,mean,variance,gamma` rows.
inline void write_estimates_csv(const std::filesystem::path& path,
                                const std::vector<EstimateRow>& rows,
                                const std::vector<std::pair<std::string, std::string>>& metadata) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  for (const auto& [key, value] : metadata) out << "# " << key << ": " << value << '\n';
  out << "k,t_s,mean,variance,gamma\n";
  for (const auto& r : rows)
    out << r.k << ',' << format_double(r.t_s) << ',' << format_double(r.mean) << ','
        << format_double(r.variance) << ',' << format_double(r.gamma) << '\n';
  if (!out) throw io_error("write failed for '" + path.string() + "'");
}

}  // namespace sdcm
