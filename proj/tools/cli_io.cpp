#include "cli_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

#include "constel/errors.hpp"

namespace constel::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if constexpr (std::is_unsigned_v<T>) {
    if (*first == '+') ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

[[noreturn]] void malformed(const std::string& what, std::size_t line) {
  throw MalformedFileError(what + " (line " + std::to_string(line) + ")");
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

std::string format_real(double v) {
  if (v == 0.0) v = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFileError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

PointCloud parse_cloud_csv(const std::string& text, const std::string& source_id, bool metric) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "id,x,y,z,frames_seen") {
    malformed("expected header id,x,y,z,frames_seen", 1);
  }
  PointCloud cloud;
  cloud.source_id = source_id;
  cloud.metric = metric;
  std::unordered_set<FruitId> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto fields = split(lines[i], ',');
    if (fields.size() != 5) malformed("expected 5 fields", i + 1);
    FruitPoint p;
    if (!parse_number(fields[0], p.id)) malformed("bad id '" + fields[0] + "'", i + 1);
    for (int d = 0; d < 3; ++d) {
      double v = 0.0;
      if (!parse_number(fields[1 + d], v) || !std::isfinite(v)) {
        malformed("bad coordinate '" + fields[1 + d] + "'", i + 1);
      }
      p.position[d] = v;
    }
    if (!parse_number(fields[4], p.frames_seen) || p.frames_seen < 0) {
      malformed("bad frames_seen '" + fields[4] + "'", i + 1);
    }
    if (!seen.insert(p.id).second) malformed("duplicate id " + std::to_string(p.id), i + 1);
    cloud.points.push_back(p);
  }
  return cloud;
}

PointCloud read_cloud_csv(const std::filesystem::path& path, bool metric) {
  return parse_cloud_csv(read_text_file(path), path.stem().string(), metric);
}

std::string format_cloud_csv(const PointCloud& cloud) {
  std::string out = "id,x,y,z,frames_seen\n";
  for (const auto& p : cloud.points) {
    out += std::to_string(p.id);
    for (int d = 0; d < 3; ++d) {
      out += ',';
      out += format_real(p.position[d]);
    }
    out += ',';
    out += std::to_string(p.frames_seen);
    out += '\n';
  }
  return out;
}

std::vector<IdPair> read_pairs_csv(const std::filesystem::path& path) {
  const auto lines = lines_of(read_text_file(path));
  if (lines.empty() || trim(lines[0]) != "query_id,map_id") malformed("expected header query_id,map_id", 1);
  std::vector<IdPair> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto fields = split(lines[i], ',');
    IdPair p;
    if (fields.size() != 2 || !parse_number(fields[0], p.first) || !parse_number(fields[1], p.second)) {
      malformed("expected two ids", i + 1);
    }
    out.push_back(p);
  }
  return out;
}

std::string format_pairs_csv(const std::vector<IdPair>& pairs) {
  std::string out = "query_id,map_id\n";
  for (const auto& [q, m] : pairs) out += std::to_string(q) + ',' + std::to_string(m) + '\n';
  return out;
}

std::string format_matches_csv(const MatchResult& result) {
  std::string out = "query_id,map_id,stage\n";
  for (const auto& c : result.correspondences) {
    out += std::to_string(c.query_id) + ',' + std::to_string(c.map_id) + ',';
    out += stage_name(c.stage);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

struct KeySpec {
  std::string name;
  std::function<bool(RunConfig&, const std::string&)> apply;
};

template <typename T>
KeySpec number_key(std::string name, T RunConfig::*group, auto field) {
  return {std::move(name), [group, field](RunConfig& c, const std::string& v) {
            return parse_number(v, (c.*group).*field);
          }};
}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> s;
    s.push_back(number_key("k", &RunConfig::enumeration, &EnumerationParams::k));
    s.push_back(number_key("n", &RunConfig::enumeration, &EnumerationParams::n));
    s.push_back(number_key("min_frames", &RunConfig::enumeration, &EnumerationParams::min_frames));
    s.push_back(number_key("max_per_anchor", &RunConfig::enumeration, &EnumerationParams::max_per_anchor));
    s.push_back(number_key("tau", &RunConfig::match, &MatchParams::tau));
    s.push_back(number_key("min_votes", &RunConfig::match, &MatchParams::min_votes));
    s.push_back(number_key("clique_eps", &RunConfig::match, &MatchParams::clique_epsilon));
    s.push_back(number_key("clique_log_eps", &RunConfig::match, &MatchParams::clique_log_epsilon));
    s.push_back({"clique_filter", [](RunConfig& c, const std::string& v) {
                   return parse_bool(v, c.match.clique_filter);
                 }});
    s.push_back(number_key("completion_radius", &RunConfig::match, &MatchParams::completion_radius));
    s.push_back(number_key("candidates", &RunConfig::match, &MatchParams::candidates_m));
    s.push_back(number_key("window_size", &RunConfig::match, &MatchParams::window_size));
    s.push_back({"ransac_thresh", [](RunConfig& c, const std::string& v) {
                   return parse_number(v, c.match.ransac.inlier_threshold);
                 }});
    s.push_back({"ransac_max_iterations", [](RunConfig& c, const std::string& v) {
                   return parse_number(v, c.match.ransac.max_iterations);
                 }});
    s.push_back({"ransac_confidence", [](RunConfig& c, const std::string& v) {
                   return parse_number(v, c.match.ransac.confidence);
                 }});
    s.push_back({"ransac_min_inliers", [](RunConfig& c, const std::string& v) {
                   return parse_number(v, c.match.ransac.min_inliers);
                 }});
    s.push_back({"metric", [](RunConfig& c, const std::string& v) { return parse_bool(v, c.metric); }});
    s.push_back({"seed", [](RunConfig& c, const std::string& v) { return parse_number(v, c.seed); }});
    return s;
  }();
  return specs;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& s : key_specs()) k.push_back(s.name);
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& s : key_specs()) {
    if (s.name != key) continue;
    if (!s.apply(*this, value)) throw ConfigError("invalid value '" + value + "' for " + key);
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  enumeration.validate();
  match.validate();
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key=value on config line " + std::to_string(i + 1));
    }
    auto key = trim(std::string_view(line).substr(0, eq));
    auto value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key on config line " + std::to_string(i + 1));
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const MalformedFileError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  for (const auto& [key, value] : parse_config_text(text)) config.set(key, value);
}

// ---------------------------------------------------------------------------
// Outputs

OutputSet::~OutputSet() {
  std::error_code ec;
  for (const auto& [tmp, final_path] : pending_) std::filesystem::remove(tmp, ec);
}

void OutputSet::stage(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  pending_.emplace_back(tmp, path);
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + tmp.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw Error("failed writing " + tmp.string());
}

void OutputSet::commit() {
  for (const auto& [tmp, final_path] : pending_) std::filesystem::rename(tmp, final_path);
  pending_.clear();
}

}  // namespace constel::cli
