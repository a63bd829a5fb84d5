#include "constel/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "constel/errors.hpp"
#include "constel/mapstore.hpp"

namespace constel {

void OrchardSpec::validate() const {
  if (trees < 1 || fruits_per_tree < 1) throw ConfigError("orchard: trees and fruits must be >= 1");
  if (fruits_spread < 0 || fruits_spread >= fruits_per_tree) {
    throw ConfigError("orchard: fruits_spread must be in [0, fruits_per_tree)");
  }
  if (!(tree_spacing > 0.0 && canopy_radius > 0.0 && canopy_height > 0.0 &&
        min_fruit_separation > 0.0 && row_length > 0.0)) {
    throw ConfigError("orchard: all dimensions must be > 0");
  }
  if (!(min_fruit_separation < canopy_radius)) {
    throw ConfigError("orchard: min_fruit_separation must be < canopy_radius");
  }
  if (row_length < (trees - 1) * tree_spacing) {
    throw ConfigError("orchard: row_length is shorter than (trees - 1) * tree_spacing");
  }
  if (min_frames < 0) throw ConfigError("orchard: min_frames must be >= 0");
}

void PerturbSpec::validate() const {
  if (!(occlusion_fraction >= 0.0 && occlusion_fraction < 1.0)) {
    throw ConfigError("perturb: occlusion_fraction must be in [0, 1)");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("perturb: noise_std must be >= 0");
  if (transform && !(transform->scale > 0.0)) throw ConfigError("perturb: scale must be > 0");
}

void TrajectorySpec::validate() const {
  if (waypoints.size() < 2) throw ConfigError("trajectory: need at least 2 waypoints");
  if (!(visibility_range > 0.0)) throw ConfigError("trajectory: visibility_range must be > 0");
  if (!(half_fov > 0.0 && half_fov < M_PI)) throw ConfigError("trajectory: half_fov out of range");
  if (!(detection_noise_std >= 0.0)) throw ConfigError("trajectory: noise must be >= 0");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 over the mixed inputs
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

PointCloud gen_orchard(const OrchardSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> spread(-spec.fruits_spread, spec.fruits_spread);
  std::uniform_int_distribution<int> frames(spec.min_frames, spec.min_frames + 30);

  PointCloud cloud;
  cloud.source_id = "orchard-seed-" + std::to_string(spec.seed);
  cloud.metric = true;
  const double min_sep2 = spec.min_fruit_separation * spec.min_fruit_separation;
  FruitId next_id = 0;
  for (int t = 0; t < spec.trees; ++t) {
    const Vec3 centre(spec.row_length / 2.0 + (t - (spec.trees - 1) / 2.0) * spec.tree_spacing,
                      0.0, spec.canopy_height);
    const int count = spec.fruits_per_tree + spread(rng);
    for (int f = 0; f < count; ++f) {
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const Vec3 offset(unit(rng), unit(rng), unit(rng));
        if (offset.squaredNorm() > 1.0) continue;
        const Vec3 p = centre + spec.canopy_radius * offset;
        const bool clear = std::none_of(cloud.points.begin(), cloud.points.end(), [&](const auto& q) {
          return (q.position - p).squaredNorm() < min_sep2;
        });
        if (!clear) continue;
        cloud.points.push_back({next_id++, p, frames(rng)});
        placed = true;
      }
      if (!placed) {
        throw Error("orchard: could not place fruit " + std::to_string(f) + " of tree " +
                    std::to_string(t) + " with the requested separation");
      }
    }
  }
  return cloud;
}

PointCloud perturb(const PointCloud& cloud, const PerturbSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t n = cloud.points.size();
  const auto removed = static_cast<std::size_t>(
      std::llround(spec.occlusion_fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<char> drop(n, 0);
  for (std::size_t i = 0; i < removed && i < n; ++i) drop[idx[i]] = 1;

  PointCloud out;
  out.source_id = cloud.source_id + "-perturbed";
  out.metric = cloud.metric && (!spec.transform || spec.transform->scale == 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise_std > 0.0 ? spec.noise_std : 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (drop[i]) continue;
    FruitPoint p = cloud.points[i];
    if (spec.noise_std > 0.0) {
      const double dx = noise(rng);
      const double dy = noise(rng);
      const double dz = noise(rng);
      p.position += Vec3(dx, dy, dz);
    }
    if (spec.transform) p.position = apply(*spec.transform, p.position);
    out.points.push_back(p);
  }
  return out;
}

double scene_span(const PointCloud& cloud) {
  if (cloud.points.empty()) return 0.0;
  Vec3 lo = cloud.points.front().position;
  Vec3 hi = lo;
  for (const auto& p : cloud.points) {
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  return (hi - lo).maxCoeff();
}

MatchParams scale_for_noise(const MatchParams& params, double sigma, const NoiseScaling& scaling) {
  MatchParams out = params;
  if (!scaling.enabled || !(sigma > 0.0)) return out;
  out.tau += scaling.tau_gain * sigma;
  out.clique_epsilon += scaling.clique_gain * sigma;
  out.ransac.inlier_threshold += scaling.ransac_gain * sigma;
  out.candidates_m = 1;
  return out;
}

std::vector<RobustnessRow> occlusion_noise_experiment(const PointCloud& cloud,
                                                      const std::vector<double>& occlusions,
                                                      const std::vector<double>& noises,
                                                      int repeats, const EnumerationParams& enumeration,
                                                      const MatchParams& params,
                                                      std::uint64_t seed,
                                                      const NoiseScaling& scaling) {
  if (occlusions.empty() || noises.empty()) throw ConfigError("robustness: empty grid");
  if (repeats < 1) throw ConfigError("robustness: repeats must be >= 1");
  const ConstellationMap map = build_map(cloud, enumeration);

  std::vector<RobustnessRow> rows;
  for (std::size_t a = 0; a < occlusions.size(); ++a) {
    for (std::size_t b = 0; b < noises.size(); ++b) {
      RobustnessRow row;
      row.occlusion_fraction = occlusions[a];
      row.noise_std = noises[b];
      std::vector<double> errors;
      for (int r = 0; r < repeats; ++r) {
        const std::uint64_t cell_seed = derive_seed(seed, a, b, static_cast<std::uint64_t>(r));
        const PointCloud perturbed =
            perturb(cloud, {occlusions[a], noises[b], std::nullopt, cell_seed});
        MatchParams cell = scale_for_noise(params, noises[b], scaling);
        cell.seed = cell_seed;
        try {
          const MatchResult result = match_clouds(map, perturbed, cell);
          double total = 0.0;
          for (const auto& p : cloud.points) total += (apply(result.transform, p.position) - p.position).norm();
          errors.push_back(total / static_cast<double>(cloud.points.size()));
        } catch (const Error&) {
          ++row.failures;
        }
      }
      row.repeats = static_cast<int>(errors.size());
      if (errors.empty()) {
        row.mean_error = std::numeric_limits<double>::quiet_NaN();
        row.std_error = std::numeric_limits<double>::quiet_NaN();
      } else {
        const double mean = std::accumulate(errors.begin(), errors.end(), 0.0) /
                            static_cast<double>(errors.size());
        double var = 0.0;
        for (double e : errors) var += (e - mean) * (e - mean);
        row.mean_error = mean;
        row.std_error = std::sqrt(var / static_cast<double>(errors.size()));
      }
      rows.push_back(row);
    }
  }
  return rows;
}

MatchingSummary matching_experiment(const OrchardSpec& base, const PerturbSpec& perturbation,
                                    const EnumerationParams& enumeration, const MatchParams& params,
                                    int repeats, bool vary_perturbation) {
  if (repeats < 1) throw ConfigError("matching: repeats must be >= 1");
  const PointCloud cloud = gen_orchard(base);
  const ConstellationMap map = build_map(cloud, enumeration);

  MatchingSummary summary;
  double lo = 1.0;
  double hi = 0.0;
  for (int r = 0; r < repeats; ++r) {
    PerturbSpec spec = perturbation;
    if (vary_perturbation) spec.seed = derive_seed(perturbation.seed, static_cast<std::uint64_t>(r));
    const PointCloud query = perturb(cloud, spec);
    std::vector<IdPair> truth;
    for (const auto& p : query.points) truth.emplace_back(p.id, p.id);

    MatchParams run = params;
    run.seed = derive_seed(params.seed, static_cast<std::uint64_t>(r), 1);
    EvalReport report;
    try {
      const MatchResult result = match_clouds(map, query, run);
      report = evaluate(result, truth, query, map, enumeration.min_frames);
    } catch (const Error&) {
      ++summary.failures;
      report = evaluate_pairs({}, truth);
    }
    summary.runs.push_back(report);
    summary.mean_precision += report.precision;
    summary.mean_recall += report.recall;
    lo = std::min(lo, report.precision);
    hi = std::max(hi, report.precision);
  }
  summary.mean_precision /= repeats;
  summary.mean_recall /= repeats;
  summary.precision_spread = hi - lo;
  return summary;
}

TrajectorySpec linear_path(double x0, double x1, int frames, double standoff, double height) {
  if (frames < 2) throw ConfigError("linear_path: need at least 2 frames");
  TrajectorySpec spec;
  Mat3 rotation;
  // camera x = world x, camera y = world -z (down), camera z = world y (forward)
  rotation << 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0;
  for (int i = 0; i < frames; ++i) {
    const double x = x0 + (x1 - x0) * i / (frames - 1);
    const Vec3 centre(x, -standoff, height);
    SimilarityTransform extrinsic;
    extrinsic.rotation = rotation;
    extrinsic.translation = -(rotation * centre);
    spec.waypoints.push_back(extrinsic);
  }
  return spec;
}

TrajectoryResult trajectory_experiment(const PointCloud& orchard, const TrajectorySpec& traj,
                                       const EnumerationParams& enumeration,
                                       const MatchParams& params) {
  traj.validate();
  const ConstellationMap map = build_map(orchard, enumeration);
  TrajectoryResult result;
  double sq = 0.0;
  int localized = 0;
  const double cos_fov = std::cos(traj.half_fov);
  for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
    const SimilarityTransform& extrinsic = traj.waypoints[i];
    TrajectoryFrame frame;
    frame.frame = static_cast<int>(i);
    frame.true_center = apply(invert(extrinsic), Vec3::Zero());

    std::mt19937_64 rng(derive_seed(traj.seed, i));
    std::normal_distribution<double> noise(0.0, traj.detection_noise_std > 0.0 ? traj.detection_noise_std : 1.0);
    PointCloud view;
    view.source_id = "frame-" + std::to_string(i);
    view.metric = true;
    for (const auto& p : orchard.points) {
      Vec3 c = apply(extrinsic, p.position);
      const double range = c.norm();
      if (range > traj.visibility_range || range == 0.0 || c.z() < cos_fov * range) continue;
      if (traj.detection_noise_std > 0.0) {
        const double dx = noise(rng);
        const double dy = noise(rng);
        const double dz = noise(rng);
        c += Vec3(dx, dy, dz);
      }
      view.points.push_back({p.id, c, p.frames_seen});
    }
    frame.visible = static_cast<int>(view.points.size());

    try {
      MatchParams run = params;
      run.seed = derive_seed(params.seed, i);
      const MatchResult match = match_clouds(map, view, run);
      frame.estimated = invert(match.transform);
      frame.estimated_center = apply(match.transform, Vec3::Zero());
      const Vec3 diff = (frame.estimated_center - frame.true_center).cwiseAbs();
      frame.tx_err = diff.x();
      frame.ty_err = diff.y();
      frame.tz_err = diff.z();
      frame.rot_err_rad = rotation_angle_between(frame.estimated.rotation, extrinsic.rotation);
      frame.localized = true;
      sq += diff.squaredNorm();
      ++localized;
    } catch (const Error&) {
      frame.localized = false;
      ++result.failures;
    }
    result.frames.push_back(frame);
  }
  result.translation_rmse = localized > 0 ? std::sqrt(sq / localized) : std::numeric_limits<double>::quiet_NaN();
  return result;
}

namespace {

std::string real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_robustness_csv(std::ostream& out, const std::vector<RobustnessRow>& rows) {
  out << "occlusion_fraction,noise_std,repeats,mean_error,std_error\n";
  for (const auto& r : rows) {
    out << real(r.occlusion_fraction) << ',' << real(r.noise_std) << ',' << r.repeats << ','
        << real(r.mean_error) << ',' << real(r.std_error) << '\n';
  }
}

void write_trajectory_csv(std::ostream& out, const TrajectoryResult& result) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out << "frame,tx_err,ty_err,tz_err,rot_err_rad\n";
  for (const auto& f : result.frames) {
    out << f.frame << ',' << real(f.localized ? f.tx_err : nan) << ','
        << real(f.localized ? f.ty_err : nan) << ',' << real(f.localized ? f.tz_err : nan) << ','
        << real(f.localized ? f.rot_err_rad : nan) << '\n';
  }
}

}  // namespace constel
