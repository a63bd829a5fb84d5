#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "constel/errors.hpp"
#include "constel/mapstore.hpp"
#include "constel/synthbench.hpp"

using namespace constel;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud c;
  c.source_id = "unit";
  for (int i = 0; i < n; ++i) c.points.push_back({static_cast<FruitId>(i), Vec3(u(rng), u(rng), u(rng)), 8});
  return c;
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  return text;
}

const ConstellationMap& orchard_map() {
  static const ConstellationMap map = build_map(gen_orchard({}), {});
  return map;
}

}  // namespace

TEST_CASE("build_map: entry counts") {
  std::mt19937_64 rng(1);
  CHECK(build_map(random_cloud(rng, 5), {}).entries().size() == 1);
  EnumerationParams p;
  p.n = 5;
  const auto map = build_map(random_cloud(rng, 6), p);
  CHECK(map.entries().size() == 6);
  CHECK(map.fruits().size() == 6);
  CHECK_THROWS_AS(build_map(random_cloud(rng, 3), {}), InsufficientPointsError);
}

TEST_CASE("build_map: frame filter counts toward the size check") {
  std::mt19937_64 rng(2);
  auto cloud = random_cloud(rng, 6);
  cloud.points[0].frames_seen = 0;
  cloud.points[1].frames_seen = 0;
  CHECK_THROWS_AS(build_map(cloud, {}), InsufficientPointsError);
}

TEST_CASE("build_map: deterministic and entries reference fruits") {
  std::mt19937_64 rng(3);
  const auto cloud = random_cloud(rng, 40);
  const auto a = build_map(cloud, {});
  const auto b = build_map(cloud, {});
  CHECK(serialize_map(a) == serialize_map(b));
  CHECK(a == b);
  for (const auto& e : a.entries()) {
    CHECK(e.member_ids.size() == static_cast<std::size_t>(e.descriptor.k));
    CHECK(e.descriptor.code.size() == 9);
    for (auto id : e.member_ids) CHECK_NOTHROW(a.fruit(id));
  }
  CHECK_THROWS_AS(a.fruit(999), InvalidCloudError);
}

TEST_CASE("query_nearest: own descriptors and tau = 0") {
  const auto& map = orchard_map();
  for (std::size_t i = 0; i < map.entries().size(); i += 997) {
    const auto hits = map.query_nearest(map.entries()[i].descriptor, 1e-6, 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].distance < 1e-12);
    CHECK(map.entries()[hits[0].entry].descriptor.code == map.entries()[i].descriptor.code);
    Descriptor moved = map.entries()[i].descriptor;
    moved.code[0] += 1e-3;
    CHECK(map.query_nearest(moved, 0.0, 1).empty());
  }
}

TEST_CASE("query_nearest: agrees with a linear scan") {
  const auto& map = orchard_map();
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, map.entries().size() - 1);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_int_distribution<int> mpick(1, 5);
  for (int i = 0; i < 1000; ++i) {
    Descriptor d = map.entries()[pick(rng)].descriptor;
    for (auto& v : d.code) v += noise(rng);
    const double tau = i % 3 == 0 ? 0.05 : 0.3;
    const int m = mpick(rng);
    const auto fast = map.query_nearest(d, tau, m);
    const auto slow = query_nearest_linear(map, d, tau, m);
    REQUIRE(fast.size() == slow.size());
    for (std::size_t j = 0; j < fast.size(); ++j) {
      CHECK(fast[j].entry == slow[j].entry);
      CHECK(fast[j].distance == doctest::Approx(slow[j].distance).epsilon(1e-12));
    }
  }
}

TEST_CASE("query_nearest: argument errors") {
  const auto& map = orchard_map();
  Descriptor wrong{{0, 0, 0, 0, 0, 0}, 4};
  CHECK_THROWS_AS(map.query_nearest(wrong, 0.1, 1), DimensionMismatchError);
  CHECK_THROWS_AS(map.query_nearest(map.entries()[0].descriptor, -1.0, 1), ConfigError);
  CHECK_THROWS_AS(map.query_nearest(map.entries()[0].descriptor, 0.1, 0), ConfigError);
}

TEST_CASE("persistence: round trip is lossless") {
  std::mt19937_64 rng(5);
  EnumerationParams p;
  p.n = 5;
  auto cloud = random_cloud(rng, 6);
  cloud.points[2].position.x() = -0.0;
  cloud.points[3].position.y() = 1.0 / 3.0;
  const auto map = build_map(cloud, p);
  const std::string text = serialize_map(map);
  const auto back = parse_map(text);
  CHECK(back == map);
  CHECK(serialize_map(back) == text);
  for (std::size_t i = 0; i < map.entries().size(); ++i) {
    const auto& a = map.entries()[i].descriptor.code;
    const auto& b = back.entries()[i].descriptor.code;
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("persistence: files") {
  const auto dir = std::filesystem::temp_directory_path() / "constel_mapstore_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "map.json";
  const auto& map = orchard_map();
  save_map(map, path);
  const auto first = std::filesystem::file_size(path);
  CHECK(load_map(path) == map);
  save_map(map, path);
  CHECK(std::filesystem::file_size(path) == first);
  CHECK_THROWS_AS(load_map(dir / "missing.json"), MalformedFileError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("persistence: corruption is detected") {
  std::mt19937_64 rng(6);
  const auto map = build_map(random_cloud(rng, 8), {});
  const std::string text = serialize_map(map);

  CHECK_THROWS_AS(parse_map(replace_once(text, "\"format_version\": 1", "\"format_version\": 2")),
                  VersionMismatchError);
  CHECK_THROWS_AS(parse_map(text.substr(0, text.size() / 2)), MalformedFileError);
  CHECK_THROWS_AS(parse_map(""), MalformedFileError);
  CHECK_THROWS_AS(parse_map("[]"), MalformedFileError);

  // Flip one digit inside the first code.
  const auto code = text.find('.', text.find("\"code\": [")) + 2;
  std::string flipped = text;
  flipped[code] = flipped[code] == '1' ? '2' : '1';
  CHECK_THROWS_AS(parse_map(flipped), ChecksumError);

  // An entry that references a fruit missing from the table.
  const auto members = text.find("\"members\": [") + 12;
  std::string dangling = text;
  dangling.replace(members, 1, "9");
  CHECK_THROWS_AS(parse_map(dangling), MalformedFileError);
}
