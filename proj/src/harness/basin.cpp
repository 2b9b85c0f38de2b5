#include "lorenza/harness/basin.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lorenza/errors.hpp"
#include "lorenza/harness/run.hpp"

namespace lorenza::harness {

std::string to_string(Basin b) {
  switch (b) {
    case Basin::Sharp: return "sharp";
    case Basin::Flat: return "flat";
    case Basin::Neither: return "neither";
  }
  return "neither";
}

Basin classify_basin(double x, const DoubleWellSpec& s) {
  if (std::abs(x - s.center_sharp) < s.width_sharp) return Basin::Sharp;
  if (std::abs(x - s.center_flat) < s.width_flat) return Basin::Flat;
  return Basin::Neither;
}

DoubleWellSpec double_well_spec_from_json(const Json& spec) {
  if (!spec.is_object() || spec.value("name", std::string{}) != "double_well")
    throw UnsupportedError("basin statistics require the double_well objective");
  DoubleWellSpec s;
  s.center_sharp = spec.value("center_sharp", s.center_sharp);
  s.width_sharp = spec.value("width_sharp", s.width_sharp);
  s.center_flat = spec.value("center_flat", s.center_flat);
  s.width_flat = spec.value("width_flat", s.width_flat);
  return s;
}

std::map<std::string, BasinCounts> basin_statistics(const std::vector<TerminalPoint>& points,
                                                    const DoubleWellSpec& spec) {
  std::map<std::string, BasinCounts> out;
  for (const auto& p : points) {
    BasinCounts& c = out[p.optimizer];
    switch (classify_basin(p.x, spec)) {
      case Basin::Sharp: ++c.sharp; break;
      case Basin::Flat: ++c.flat; break;
      case Basin::Neither: ++c.neither; break;
    }
  }
  return out;
}

BasinReport basin_statistics_from_files(const std::vector<std::filesystem::path>& files) {
  if (files.empty()) throw ConfigError("basin-stats: no metrics files");
  std::vector<TerminalPoint> points;
  std::optional<DoubleWellSpec> spec;
  for (const auto& f : files) {
    const MetricsFile mf = read_metrics_file(f);
    if (!mf.summary)
      throw ConfigError("basin-stats: '" + f.string() + "' has no summary (run not terminated)");
    const Json& s = *mf.summary;
    const DoubleWellSpec this_spec = double_well_spec_from_json(s.at("objective"));
    if (spec && (spec->center_sharp != this_spec.center_sharp ||
                 spec->width_sharp != this_spec.width_sharp ||
                 spec->center_flat != this_spec.center_flat ||
                 spec->width_flat != this_spec.width_flat))
      throw ConfigError("basin-stats: files come from different landscapes");
    spec = this_spec;
    const Json& layers = s.at("final_params");
    if (layers.empty()) throw ConfigError("basin-stats: summary lacks final_params");
    points.push_back({s.at("optimizer").get<std::string>(), s.at("seed").get<std::uint64_t>(),
                      layers.at(0).at("data").at(0).get<double>()});
  }
  return BasinReport{*spec, basin_statistics(points, *spec)};
}

std::string format_basin_table(const BasinReport& report) {
  std::ostringstream os;
  os << "optimizer,sharp,flat,neither,total\n";
  for (const auto& [name, c] : report.counts)
    os << name << ',' << c.sharp << ',' << c.flat << ',' << c.neither << ',' << c.total() << '\n';
  return os.str();
}

namespace {

bool wildcard_match(std::string_view pat, std::string_view s) {
  std::size_t p = 0, i = 0, star = std::string_view::npos, mark = 0;
  while (i < s.size()) {
    if (p < pat.size() && (pat[p] == '?' || pat[p] == s[i])) {
      ++p;
      ++i;
    } else if (p < pat.size() && pat[p] == '*') {
      star = p++;
      mark = i;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      i = ++mark;
    } else {
      return false;
    }
  }
  while (p < pat.size() && pat[p] == '*') ++p;
  return p == pat.size();
}

}  // namespace

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  const std::filesystem::path p(pattern);
  const std::string leaf = p.filename().string();
  if (leaf.find_first_of("*?") == std::string::npos) return {p};
  const std::filesystem::path dir = p.has_parent_path() ? p.parent_path() : ".";
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && wildcard_match(leaf, entry.path().filename().string()))
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lorenza::harness
