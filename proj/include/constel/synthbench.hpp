#pragma once

// Synthetic orchards and the robustness, matching and trajectory experiments.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "constel/constellations.hpp"
#include "constel/matcher.hpp"

namespace constel {

/// Trees in a row along +x, canopies as spheres centred at canopy_height.
struct OrchardSpec {
  int trees = 5;
  int fruits_per_tree = 60;
  int fruits_spread = 0;  // per-tree count uniform in mean +- spread
  double tree_spacing = 2.0;
  double canopy_radius = 1.0;
  double canopy_height = 1.5;
  double min_fruit_separation = 0.08;
  double row_length = 8.0;  // trees are centred in [0, row_length]
  int min_frames = 5;       // lower bound for generated frames_seen
  std::uint64_t seed = 1;

  void validate() const;
};

struct PerturbSpec {
  double occlusion_fraction = 0.0;
  double noise_std = 0.0;
  std::optional<SimilarityTransform> transform;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Throws ConfigError for invalid specs and Error when the separation
/// constraint cannot be met.
PointCloud gen_orchard(const OrchardSpec& spec);

/// Removes round(fraction * N) uniformly chosen points, adds N(0, sigma^2)
/// noise per coordinate, then applies the optional transform. Ids survive.
PointCloud perturb(const PointCloud& cloud, const PerturbSpec& spec);

/// Longest axis-aligned bounding box side.
double scene_span(const PointCloud& cloud);

/// Seed for an independent experiment cell.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

struct RobustnessRow {
  double occlusion_fraction = 0.0;
  double noise_std = 0.0;
  double mean_error = 0.0;  // NaN when every repeat failed to match
  double std_error = 0.0;
  int repeats = 0;          // successful repeats contributing to the mean
  int failures = 0;
};

/// Tolerances widened in proportion to the injected noise level:
/// tau += tau_gain * sigma, and likewise for the clique epsilon and the RANSAC
/// inlier threshold. Noisy cells query a single candidate per constellation.
struct NoiseScaling {
  bool enabled = true;
  double tau_gain = 6.0;
  double clique_gain = 4.0;
  double ransac_gain = 4.0;
};

MatchParams scale_for_noise(const MatchParams& params, double sigma, const NoiseScaling& scaling);

/// Map on the clean cloud; each cell perturbs, matches and measures the mean
/// displacement of the original points under the recovered transform.
std::vector<RobustnessRow> occlusion_noise_experiment(const PointCloud& cloud,
                                                      const std::vector<double>& occlusions,
                                                      const std::vector<double>& noises,
                                                      int repeats, const EnumerationParams& enumeration,
                                                      const MatchParams& params,
                                                      std::uint64_t seed,
                                                      const NoiseScaling& scaling = {});

struct MatchingSummary {
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double precision_spread = 0.0;  // max - min over runs
  std::vector<EvalReport> runs;
  int failures = 0;
};

/// Builds the map from the clean orchard and matches perturbed copies against
/// the identity-id ground truth. With vary_perturbation the perturbation seed
/// changes per repeat; otherwise only the pipeline seed does.
MatchingSummary matching_experiment(const OrchardSpec& base, const PerturbSpec& perturbation,
                                    const EnumerationParams& enumeration, const MatchParams& params,
                                    int repeats, bool vary_perturbation);

/// Camera poses are world -> camera extrinsics (camera looks along +z).
struct TrajectorySpec {
  std::vector<SimilarityTransform> waypoints;
  double visibility_range = 5.0;
  double half_fov = 0.87;  // radians
  double detection_noise_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Camera at height `height`, `standoff` metres in front of the row (-y),
/// facing the trees, moving along x from x0 to x1 in `frames` steps.
TrajectorySpec linear_path(double x0, double x1, int frames, double standoff = 3.0,
                           double height = 1.5);

struct TrajectoryFrame {
  int frame = 0;
  bool localized = false;
  int visible = 0;
  Vec3 true_center = Vec3::Zero();
  Vec3 estimated_center = Vec3::Zero();
  SimilarityTransform estimated;  // estimated extrinsics
  double tx_err = 0.0;
  double ty_err = 0.0;
  double tz_err = 0.0;
  double rot_err_rad = 0.0;
};

struct TrajectoryResult {
  std::vector<TrajectoryFrame> frames;
  double translation_rmse = 0.0;  // over localized frames
  int failures = 0;
};

TrajectoryResult trajectory_experiment(const PointCloud& orchard, const TrajectorySpec& traj,
                                       const EnumerationParams& enumeration,
                                       const MatchParams& params);

// CSV writers; columns are fixed.
void write_robustness_csv(std::ostream& out, const std::vector<RobustnessRow>& rows);
void write_trajectory_csv(std::ostream& out, const TrajectoryResult& result);

}  // namespace constel
