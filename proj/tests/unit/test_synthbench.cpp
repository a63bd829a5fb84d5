#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "constel/errors.hpp"
#include "constel/synthbench.hpp"

using namespace constel;

TEST_CASE("gen_orchard: deterministic and well separated") {
  OrchardSpec spec;
  spec.seed = 11;
  const auto a = gen_orchard(spec);
  const auto b = gen_orchard(spec);
  REQUIRE(a.points.size() == b.points.size());
  CHECK(a.points.size() == 300);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].id == b.points[i].id);
    CHECK(a.points[i].position == b.points[i].position);
    CHECK(a.points[i].frames_seen >= spec.min_frames);
  }
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    for (std::size_t j = i + 1; j < a.points.size(); ++j) {
      CHECK((a.points[i].position - a.points[j].position).norm() >= spec.min_fruit_separation);
    }
  }
  const double span = scene_span(a);
  CHECK(span > (spec.trees - 1) * spec.tree_spacing);
  CHECK(span <= (spec.trees - 1) * spec.tree_spacing + 2 * spec.canopy_radius);
  spec.seed = 12;
  CHECK(gen_orchard(spec).points[0].position != a.points[0].position);
}

TEST_CASE("gen_orchard: single fruit and invalid specs") {
  OrchardSpec spec;
  spec.trees = 1;
  spec.fruits_per_tree = 1;
  CHECK(gen_orchard(spec).points.size() == 1);
  spec.trees = 0;
  CHECK_THROWS_AS(gen_orchard(spec), ConfigError);
  spec = {};
  spec.min_fruit_separation = 2.0;
  CHECK_THROWS_AS(gen_orchard(spec), ConfigError);
  spec = {};
  spec.fruits_per_tree = 5000;
  spec.min_fruit_separation = 0.5;
  CHECK_THROWS_AS(gen_orchard(spec), Error);
}

TEST_CASE("perturb: identity, exact occlusion count and noise level") {
  OrchardSpec spec;
  spec.trees = 1;
  spec.fruits_per_tree = 100;
  spec.min_fruit_separation = 0.01;
  const auto cloud = gen_orchard(spec);
  const auto same = perturb(cloud, {});
  REQUIRE(same.points.size() == cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) CHECK(same.points[i].position == cloud.points[i].position);

  const auto half = perturb(cloud, {0.5, 0.0, std::nullopt, 3});
  CHECK(half.points.size() == 50);
  std::set<FruitId> ids;
  for (const auto& p : half.points) {
    CHECK(ids.insert(p.id).second);
    CHECK(cloud.find(p.id)->position == p.position);
  }

  PointCloud flat;
  for (FruitId i = 0; i < 10000; ++i) flat.points.push_back({i, Vec3::Zero(), 1});
  const double sigma = 0.03;
  const auto noisy = perturb(flat, {0.0, sigma, std::nullopt, 4});
  double sq = 0.0;
  for (const auto& p : noisy.points) sq += p.position.squaredNorm();
  const double measured = std::sqrt(sq / (3.0 * noisy.points.size()));
  CHECK(std::abs(measured - sigma) < 0.05 * sigma);

  CHECK_THROWS_AS(perturb(cloud, {1.0, 0.0, std::nullopt, 0}), ConfigError);
  CHECK_THROWS_AS(perturb(cloud, {0.0, -1.0, std::nullopt, 0}), ConfigError);
}

TEST_CASE("perturb: transform and metric flag") {
  const auto cloud = gen_orchard({});
  SimilarityTransform t;
  t.rotation = axis_angle(Vec3::UnitZ(), 0.5);
  t.translation = Vec3(1, 2, 3);
  const auto rigid = perturb(cloud, {0.0, 0.0, t, 0});
  CHECK(rigid.metric);
  CHECK((rigid.points[7].position - apply(t, cloud.points[7].position)).norm() < 1e-12);
  t.scale = 2.0;
  CHECK_FALSE(perturb(cloud, {0.0, 0.0, t, 0}).metric);
}

TEST_CASE("derive_seed separates cells") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) CHECK(seen.insert(derive_seed(1, a, b)).second);
  }
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
}

TEST_CASE("scale_for_noise") {
  MatchParams p;
  p.candidates_m = 3;
  const auto clean = scale_for_noise(p, 0.0, {});
  CHECK(clean.tau == p.tau);
  CHECK(clean.candidates_m == 3);
  const auto noisy = scale_for_noise(p, 0.01, {});
  CHECK(noisy.tau == doctest::Approx(p.tau + 0.06));
  CHECK(noisy.clique_epsilon == doctest::Approx(p.clique_epsilon + 0.04));
  CHECK(noisy.ransac.inlier_threshold == doctest::Approx(p.ransac.inlier_threshold + 0.04));
  CHECK(noisy.candidates_m == 1);
  NoiseScaling off;
  off.enabled = false;
  CHECK(scale_for_noise(p, 0.01, off).tau == p.tau);
}

TEST_CASE("robustness: clean cell is exact") {
  OrchardSpec spec;
  spec.trees = 2;
  spec.fruits_per_tree = 50;
  const auto cloud = gen_orchard(spec);
  const auto rows = occlusion_noise_experiment(cloud, {0.0, 0.2}, {0.0}, 2, {}, {}, 5);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.failures == 0);
    CHECK(r.repeats == 2);
    CHECK(r.mean_error < 1e-9);
  }
  std::ostringstream csv;
  write_robustness_csv(csv, rows);
  CHECK(csv.str().rfind("occlusion_fraction,noise_std,repeats,mean_error,std_error\n", 0) == 0);
}

TEST_CASE("matching experiment: stable precision") {
  OrchardSpec spec;
  spec.trees = 2;
  spec.fruits_per_tree = 50;
  const auto summary = matching_experiment(spec, {0.2, 0.01, std::nullopt, 1}, {}, {}, 4, false);
  CHECK(summary.failures == 0);
  CHECK(summary.runs.size() == 4);
  CHECK(summary.precision_spread < 0.02);
  CHECK(summary.mean_precision > 0.95);
}

TEST_CASE("trajectory: static camera is exact") {
  OrchardSpec spec;
  spec.trees = 2;
  spec.fruits_per_tree = 50;
  const auto cloud = gen_orchard(spec);
  auto path = linear_path(3.0, 5.0, 2);
  path.waypoints[1] = path.waypoints[0];
  const auto r = trajectory_experiment(cloud, path, {}, {});
  REQUIRE(r.frames.size() == 2);
  CHECK(r.failures == 0);
  for (const auto& f : r.frames) {
    CHECK(f.localized);
    CHECK(f.visible >= 5);
    CHECK((f.estimated_center - f.true_center).norm() < 1e-9);
    CHECK(f.rot_err_rad < 1e-9);
  }
  std::ostringstream csv;
  write_trajectory_csv(csv, r);
  CHECK(csv.str().rfind("frame,tx_err,ty_err,tz_err,rot_err_rad\n", 0) == 0);
}

TEST_CASE("trajectory: relative motion between frames") {
  OrchardSpec spec;
  spec.trees = 3;
  spec.fruits_per_tree = 50;
  const auto cloud = gen_orchard(spec);
  const auto path = linear_path(3.0, 5.0, 3);
  const auto r = trajectory_experiment(cloud, path, {}, {});
  REQUIRE(r.failures == 0);
  for (std::size_t i = 1; i < r.frames.size(); ++i) {
    const Vec3 step = r.frames[i].estimated_center - r.frames[i - 1].estimated_center;
    CHECK((step - Vec3(1.0, 0, 0)).norm() < 1e-6);
  }
  CHECK_THROWS_AS(linear_path(0, 1, 1), ConfigError);
}
