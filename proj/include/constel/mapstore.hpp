#pragma once

// Constellation map: descriptors of every constellation in a reference cloud,
// keyed to the fruit ids they were built from.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "constel/constellations.hpp"
#include "constel/kdtree.hpp"

namespace constel {

inline constexpr int kMapFormatVersion = 1;

struct MapEntry {
  Descriptor descriptor;
  std::vector<FruitId> member_ids;  // canonical order, matches descriptor.code
  FruitId anchor_id = 0;
};

struct MapSource {
  std::string source_id;
  bool metric = true;
};

class ConstellationMap {
 public:
  ConstellationMap() = default;
  /// Validates references, sorts entries by (anchor, members) and builds the
  /// descriptor index. Throws MalformedFileError on inconsistent input.
  ConstellationMap(EnumerationParams params, MapSource source, std::vector<FruitPoint> fruits,
                   std::vector<MapEntry> entries);

  int format_version() const { return kMapFormatVersion; }
  const EnumerationParams& params() const { return params_; }
  const MapSource& source() const { return source_; }
  const std::vector<FruitPoint>& fruits() const { return fruits_; }  // sorted by id
  const std::vector<MapEntry>& entries() const { return entries_; }
  const CloudIndex& fruit_index() const { return fruit_index_; }

  /// Fruit position by id; throws InvalidCloudError for unknown ids.
  const FruitPoint& fruit(FruitId id) const;

  /// The map's fruits as a cloud.
  PointCloud cloud() const;

  struct Hit {
    std::size_t entry;  // index into entries()
    double distance;
  };
  /// Up to m entries with descriptor distance <= tau, nearest first (ties by
  /// entry index). Throws DimensionMismatchError when d.k differs.
  std::vector<Hit> query_nearest(const Descriptor& d, double tau, int m) const;

  friend bool operator==(const ConstellationMap& a, const ConstellationMap& b);

 private:
  EnumerationParams params_;
  MapSource source_;
  std::vector<FruitPoint> fruits_;
  std::vector<MapEntry> entries_;
  CloudIndex fruit_index_{{}};
  KdTree code_index_;
};

/// Throws InsufficientPointsError when the cloud has fewer than k points
/// passing the frame filter.
ConstellationMap build_map(const PointCloud& cloud, const EnumerationParams& params);

/// Exhaustive counterpart of ConstellationMap::query_nearest.
std::vector<ConstellationMap::Hit> query_nearest_linear(const ConstellationMap& map,
                                                        const Descriptor& d, double tau, int m);

/// JSON document, byte-deterministic for a given map.
std::string serialize_map(const ConstellationMap& map);
ConstellationMap parse_map(const std::string& text);

void save_map(const ConstellationMap& map, const std::filesystem::path& path);
ConstellationMap load_map(const std::filesystem::path& path);

}  // namespace constel
