#pragma once

// File formats and configuration layering for the constel tool.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "constel/constellations.hpp"
#include "constel/matcher.hpp"

namespace constel::cli {

/// `id,x,y,z,frames_seen` with a header row. The source id is the file stem.
PointCloud parse_cloud_csv(const std::string& text, const std::string& source_id, bool metric);
PointCloud read_cloud_csv(const std::filesystem::path& path, bool metric);
std::string format_cloud_csv(const PointCloud& cloud);

/// `query_id,map_id` with a header row.
std::vector<IdPair> read_pairs_csv(const std::filesystem::path& path);
std::string format_pairs_csv(const std::vector<IdPair>& pairs);

std::string format_matches_csv(const MatchResult& result);

/// %.17g, with negative zero written as 0.
std::string format_real(double v);

struct RunConfig {
  EnumerationParams enumeration;
  MatchParams match;
  bool metric = true;
  std::uint64_t seed = 0;

  /// Applies one key=value setting. Throws ConfigError for unknown keys or
  /// unparsable values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

/// Config keys in the order they are documented.
const std::vector<std::string>& config_keys();

/// Parses `key = value` lines; `#` starts a comment.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Writes every staged file next to its destination and renames them into
/// place on commit. Staged files still pending at destruction are removed.
class OutputSet {
 public:
  OutputSet() = default;
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet();

  void stage(const std::filesystem::path& path, const std::string& content);
  void commit();

 private:
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pending_;  // tmp, final
};

std::string read_text_file(const std::filesystem::path& path);

}  // namespace constel::cli
