#include "constel/mapstore.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "constel/errors.hpp"

namespace constel {

namespace {

double positive_zero(double v) { return v == 0.0 ? 0.0 : v; }

bool entry_less(const MapEntry& a, const MapEntry& b) {
  if (a.anchor_id != b.anchor_id) return a.anchor_id < b.anchor_id;
  return a.member_ids < b.member_ids;
}

}  // namespace

ConstellationMap::ConstellationMap(EnumerationParams params, MapSource source,
                                   std::vector<FruitPoint> fruits, std::vector<MapEntry> entries)
    : params_(params), source_(std::move(source)), fruits_(std::move(fruits)),
      entries_(std::move(entries)) {
  try {
    params_.validate();
  } catch (const ConfigError& e) {
    throw MalformedFileError(std::string("map params: ") + e.what());
  }
  std::sort(fruits_.begin(), fruits_.end(),
            [](const FruitPoint& a, const FruitPoint& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < fruits_.size(); ++i) {
    if (i > 0 && fruits_[i].id == fruits_[i - 1].id) {
      throw MalformedFileError("map: duplicate fruit id " + std::to_string(fruits_[i].id));
    }
    if (!fruits_[i].position.allFinite()) {
      throw MalformedFileError("map: non-finite fruit position");
    }
    for (int c = 0; c < 3; ++c) fruits_[i].position[c] = positive_zero(fruits_[i].position[c]);
  }
  fruit_index_ = CloudIndex(fruits_);

  const auto k = static_cast<std::size_t>(params_.k);
  for (auto& e : entries_) {
    if (e.member_ids.size() != k || e.descriptor.k != params_.k ||
        e.descriptor.code.size() != 3 * (k - 2)) {
      throw MalformedFileError("map: entry does not match k = " + std::to_string(k));
    }
    if (std::find(e.member_ids.begin(), e.member_ids.end(), e.anchor_id) == e.member_ids.end()) {
      throw MalformedFileError("map: anchor is not a member of its entry");
    }
    for (auto id : e.member_ids) {
      if (!fruit_index_.position_of(id)) {
        throw MalformedFileError("map: entry references unknown fruit " + std::to_string(id));
      }
    }
    for (auto& v : e.descriptor.code) {
      if (!std::isfinite(v)) throw MalformedFileError("map: non-finite descriptor value");
      v = positive_zero(v);
    }
  }
  std::sort(entries_.begin(), entries_.end(), entry_less);

  std::vector<double> rows;
  rows.reserve(entries_.size() * 3 * (k - 2));
  for (const auto& e : entries_) rows.insert(rows.end(), e.descriptor.code.begin(), e.descriptor.code.end());
  code_index_ = KdTree(3 * (k - 2), std::move(rows));
}

const FruitPoint& ConstellationMap::fruit(FruitId id) const {
  const auto pos = fruit_index_.position_of(id);
  if (!pos) throw InvalidCloudError("map has no fruit " + std::to_string(id));
  return fruits_[*pos];
}

PointCloud ConstellationMap::cloud() const { return {source_.source_id, fruits_, source_.metric}; }

std::vector<ConstellationMap::Hit> ConstellationMap::query_nearest(const Descriptor& d, double tau,
                                                                   int m) const {
  if (d.k != params_.k || d.code.size() != code_index_.dim()) {
    throw DimensionMismatchError("query descriptor k does not match the map");
  }
  if (!(tau >= 0.0)) throw ConfigError("tau must be >= 0");
  if (m < 1) throw ConfigError("candidate count must be >= 1");
  std::vector<Hit> out;
  if (entries_.empty()) return out;
  // Slightly widened squared bound, then filtered on the true distance.
  const auto hits = code_index_.nearest(d.code, static_cast<std::size_t>(m), tau * tau * (1.0 + 1e-9));
  for (const auto& h : hits) {
    const double dist = std::sqrt(h.sq_dist);
    if (dist <= tau) out.push_back({h.index, dist});
  }
  return out;
}

bool operator==(const ConstellationMap& a, const ConstellationMap& b) {
  const auto& pa = a.params_;
  const auto& pb = b.params_;
  if (pa.k != pb.k || pa.n != pb.n || pa.min_frames != pb.min_frames ||
      pa.max_per_anchor != pb.max_per_anchor) {
    return false;
  }
  if (a.source_.source_id != b.source_.source_id || a.source_.metric != b.source_.metric) return false;
  if (a.fruits_.size() != b.fruits_.size() || a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.fruits_.size(); ++i) {
    const auto& fa = a.fruits_[i];
    const auto& fb = b.fruits_[i];
    if (fa.id != fb.id || fa.position != fb.position || fa.frames_seen != fb.frames_seen) return false;
  }
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& ea = a.entries_[i];
    const auto& eb = b.entries_[i];
    if (ea.anchor_id != eb.anchor_id || ea.member_ids != eb.member_ids ||
        ea.descriptor.code != eb.descriptor.code) {
      return false;
    }
  }
  return true;
}

ConstellationMap build_map(const PointCloud& cloud, const EnumerationParams& params) {
  params.validate();
  cloud.validate();
  const auto eligible = std::count_if(cloud.points.begin(), cloud.points.end(), [&](const auto& p) {
    return p.frames_seen >= params.min_frames;
  });
  if (eligible < params.k) {
    throw InsufficientPointsError("cloud has " + std::to_string(eligible) +
                                  " fruits seen in >= " + std::to_string(params.min_frames) +
                                  " frames, need k = " + std::to_string(params.k));
  }
  auto described = enumerate_described(cloud, params);
  std::vector<MapEntry> entries;
  entries.reserve(described.size());
  for (auto& d : described) {
    entries.push_back({std::move(d.descriptor), std::move(d.constellation.member_ids),
                       d.constellation.anchor_id});
  }
  return ConstellationMap(params, {cloud.source_id, cloud.metric}, cloud.points, std::move(entries));
}

std::vector<ConstellationMap::Hit> query_nearest_linear(const ConstellationMap& map,
                                                        const Descriptor& d, double tau, int m) {
  std::vector<ConstellationMap::Hit> all;
  for (std::size_t i = 0; i < map.entries().size(); ++i) {
    const double dist = descriptor_distance(d, map.entries()[i].descriptor);
    if (dist <= tau) all.push_back({i, dist});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.entry < b.entry;
  });
  if (all.size() > static_cast<std::size_t>(m)) all.resize(static_cast<std::size_t>(m));
  return all;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

void put_real(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string checksum_of(const std::string& body) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016" PRIx64, fnv1a64(body));
  return buf;
}

// Renders the document; the checksum line is present only when `checksum`
// is non-empty.
std::string render(const ConstellationMap& map, const std::string& checksum) {
  std::string out;
  out += "{\n  \"format_version\": " + std::to_string(map.format_version()) + ",\n";
  if (!checksum.empty()) out += "  \"checksum\": \"" + checksum + "\",\n";
  const auto& p = map.params();
  out += "  \"params\": {\"k\": " + std::to_string(p.k) + ", \"n\": " + std::to_string(p.n) +
         ", \"min_frames\": " + std::to_string(p.min_frames) +
         ", \"max_per_anchor\": " + std::to_string(p.max_per_anchor) + "},\n";
  out += "  \"source\": {\"source_id\": " + nlohmann::json(map.source().source_id).dump() +
         ", \"metric\": " + (map.source().metric ? "true" : "false") + "},\n";

  out += "  \"fruits\": [";
  for (std::size_t i = 0; i < map.fruits().size(); ++i) {
    const auto& f = map.fruits()[i];
    out += i == 0 ? "\n    " : ",\n    ";
    out += "{\"id\": " + std::to_string(f.id) + ", \"x\": ";
    put_real(out, f.position.x());
    out += ", \"y\": ";
    put_real(out, f.position.y());
    out += ", \"z\": ";
    put_real(out, f.position.z());
    out += ", \"frames_seen\": " + std::to_string(f.frames_seen) + "}";
  }
  out += map.fruits().empty() ? "],\n" : "\n  ],\n";

  out += "  \"entries\": [";
  for (std::size_t i = 0; i < map.entries().size(); ++i) {
    const auto& e = map.entries()[i];
    out += i == 0 ? "\n    " : ",\n    ";
    out += "{\"anchor\": " + std::to_string(e.anchor_id) + ", \"members\": [";
    for (std::size_t j = 0; j < e.member_ids.size(); ++j) {
      if (j) out += ", ";
      out += std::to_string(e.member_ids[j]);
    }
    out += "], \"code\": [";
    for (std::size_t j = 0; j < e.descriptor.code.size(); ++j) {
      if (j) out += ", ";
      put_real(out, e.descriptor.code[j]);
    }
    out += "]}";
  }
  out += map.entries().empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

template <typename T>
T read_uint(const nlohmann::json& j, const char* what) {
  if (!j.is_number_unsigned()) throw MalformedFileError(std::string("expected unsigned integer for ") + what);
  return j.get<T>();
}

int read_int(const nlohmann::json& j, const char* what) {
  if (!j.is_number_integer()) throw MalformedFileError(std::string("expected integer for ") + what);
  return j.get<int>();
}

double read_real(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) throw MalformedFileError(std::string("expected number for ") + what);
  return j.get<double>();
}

}  // namespace

std::string serialize_map(const ConstellationMap& map) {
  return render(map, checksum_of(render(map, "")));
}

ConstellationMap parse_map(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedFileError(std::string("map file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw MalformedFileError("map file lacks format_version");
  }
  const int version = read_int(doc["format_version"], "format_version");
  if (version != kMapFormatVersion) {
    throw VersionMismatchError("map format_version " + std::to_string(version) +
                               " is not supported (expected " +
                               std::to_string(kMapFormatVersion) + ")");
  }

  std::string checksum;
  std::optional<ConstellationMap> map;
  try {
    if (!doc.at("checksum").is_string()) throw MalformedFileError("checksum must be a string");
    checksum = doc.at("checksum").get<std::string>();

    const auto& jp = doc.at("params");
    EnumerationParams params;
    params.k = read_int(jp.at("k"), "params.k");
    params.n = read_int(jp.at("n"), "params.n");
    params.min_frames = read_int(jp.at("min_frames"), "params.min_frames");
    params.max_per_anchor = jp.contains("max_per_anchor")
                                ? read_int(jp.at("max_per_anchor"), "params.max_per_anchor")
                                : 0;

    const auto& js = doc.at("source");
    MapSource source;
    if (!js.at("source_id").is_string() || !js.at("metric").is_boolean()) {
      throw MalformedFileError("malformed source block");
    }
    source.source_id = js.at("source_id").get<std::string>();
    source.metric = js.at("metric").get<bool>();

    std::vector<FruitPoint> fruits;
    for (const auto& jf : doc.at("fruits")) {
      FruitPoint f;
      f.id = read_uint<FruitId>(jf.at("id"), "fruit id");
      f.position = {read_real(jf.at("x"), "x"), read_real(jf.at("y"), "y"), read_real(jf.at("z"), "z")};
      f.frames_seen = read_int(jf.at("frames_seen"), "frames_seen");
      fruits.push_back(f);
    }

    std::vector<MapEntry> entries;
    for (const auto& je : doc.at("entries")) {
      MapEntry e;
      e.anchor_id = read_uint<FruitId>(je.at("anchor"), "anchor");
      for (const auto& m : je.at("members")) e.member_ids.push_back(read_uint<FruitId>(m, "member"));
      for (const auto& c : je.at("code")) e.descriptor.code.push_back(read_real(c, "code"));
      e.descriptor.k = static_cast<int>(e.member_ids.size());
      entries.push_back(std::move(e));
    }
    map.emplace(params, std::move(source), std::move(fruits), std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("malformed map file: ") + e.what());
  }

  if (checksum_of(render(*map, "")) != checksum) {
    throw ChecksumError("map checksum mismatch (file corrupted or edited)");
  }
  return std::move(*map);
}

void save_map(const ConstellationMap& map, const std::filesystem::path& path) {
  const std::string text = serialize_map(map);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing " + path.string());
}

ConstellationMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFileError("cannot open map file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_map(buf.str());
}

}  // namespace constel
