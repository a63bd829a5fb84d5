#include "commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "cli_io.hpp"
#include "constel/errors.hpp"
#include "constel/mapstore.hpp"
#include "constel/matcher.hpp"
#include "constel/synthbench.hpp"

namespace constel::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Flags that mirror config keys are kept as strings and routed through
// RunConfig::set, so file values and flag values share one parser.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::string>> options;  // option, config key
  std::map<std::string, std::string> values;
  CLI::Option* metric = nullptr;
  bool metric_value = true;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace_back(app->add_option(flag, values[key], help), key);
  }
};

void add_config_flags(CLI::App* app, ConfigFlags& f, bool matching) {
  app->add_option("--config", f.config_path, "key=value config file (default: $CONSTEL_CONFIG)");
  f.add(app, "--seed", "seed", "global seed");
  f.add(app, "--k", "k", "constellation size");
  f.add(app, "--n", "n", "nearest neighbours per anchor");
  f.add(app, "--min-frames", "min_frames", "minimum frames_seen for a fruit to be used");
  f.metric = app->add_flag("--metric,!--no-metric", f.metric_value, "input cloud units are metres");
  if (!matching) return;
  f.add(app, "--tau", "tau", "descriptor distance threshold");
  f.add(app, "--min-votes", "min_votes", "minimum votes for a correspondence");
  f.add(app, "--clique-eps", "clique_eps", "pairwise distance tolerance");
  f.add(app, "--ransac-thresh", "ransac_thresh", "RANSAC inlier threshold");
  f.add(app, "--candidates", "candidates", "map candidates per query constellation");
}

RunConfig resolve_config(const ConfigFlags& f) {
  RunConfig config;
  std::string path = f.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("CONSTEL_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) apply_config_file(config, path);
  for (const auto& [opt, key] : f.options) {
    if (opt->count() > 0) config.set(key, f.values.at(key));
  }
  if (f.metric && f.metric->count() > 0) config.metric = f.metric_value;
  config.match.seed = config.seed;
  config.validate();
  return config;
}

std::vector<double> parse_range(const std::string& text, const std::string& what) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(v)) {
      throw ConfigError("bad " + what + " value '" + text + "'");
    }
    parts.push_back(v);
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw ConfigError(what + " must be a value or start:stop:step");
  }
  const auto steps = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  std::vector<double> out;
  for (long i = 0; i <= steps; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  return out;
}

std::vector<double> parse_triple(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) out.clear();
    } catch (const std::exception&) {
      out.clear();
    }
    if (out.empty()) break;
  }
  if (out.size() != 3) throw ConfigError(what + " must be x,y,z");
  return out;
}

json transform_json(const SimilarityTransform& t) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)});
  return {{"rotation", rot},
          {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}},
          {"scale", t.scale}};
}

json pose_json(const MatchResult& r) {
  json j = transform_json(r.transform);
  j["inliers"] = r.inlier_ids.size();
  j["correspondences"] = r.correspondences.size();
  const auto& s = r.stats;
  j["stats"] = {{"query_constellations", s.query_constellations},
                {"matched_constellations", s.matched_constellations},
                {"hungarian", s.hungarian},
                {"clique_survivors", s.clique_survivors},
                {"ransac_inliers", s.ransac_inliers},
                {"completed", s.completed},
                {"inlier_rms", s.inlier_rms}};
  return j;
}

json eval_json(const EvalReport& e) {
  return {{"true_positives", e.true_positives},
          {"false_positives", e.false_positives},
          {"false_negatives", e.false_negatives},
          {"precision", e.precision},
          {"recall", e.recall}};
}

json params_json(const RunConfig& c) {
  return {{"k", c.enumeration.k},
          {"n", c.enumeration.n},
          {"min_frames", c.enumeration.min_frames},
          {"tau", c.match.tau},
          {"min_votes", c.match.min_votes},
          {"clique_eps", c.match.clique_epsilon},
          {"ransac_thresh", c.match.ransac.inlier_threshold},
          {"seed", c.seed}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

fs::path pose_path_for(const fs::path& matches) {
  auto p = matches;
  p.replace_extension(".pose.json");
  return p;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
}

struct OrchardFlags {
  OrchardSpec spec;
  std::string cloud;  // optional input instead of a synthetic orchard

  void add(CLI::App* app, bool allow_cloud) {
    app->add_option("--trees", spec.trees, "number of trees");
    app->add_option("--fruits-per-tree", spec.fruits_per_tree, "mean fruits per tree");
    app->add_option("--fruits-spread", spec.fruits_spread, "per-tree fruit count spread");
    app->add_option("--tree-spacing", spec.tree_spacing, "distance between trees");
    app->add_option("--canopy-radius", spec.canopy_radius, "canopy sphere radius");
    app->add_option("--min-separation", spec.min_fruit_separation, "minimum fruit separation");
    if (allow_cloud) app->add_option("--cloud", cloud, "use this cloud CSV instead of a synthetic orchard");
  }

  PointCloud make(const RunConfig& config) const {
    if (!cloud.empty()) return read_cloud_csv(cloud, config.metric);
    OrchardSpec s = spec;
    s.seed = config.seed;
    return gen_orchard(s);
  }
};

struct TransformFlags {
  double yaw_deg = 0.0;
  double scale = 1.0;
  std::string shift = "0,0,0";

  void add(CLI::App* app) {
    app->add_option("--yaw-deg", yaw_deg, "rotation about z applied to the perturbed copy");
    app->add_option("--shift", shift, "translation x,y,z applied to the perturbed copy");
    app->add_option("--scale", scale, "scale applied to the perturbed copy");
  }

  std::optional<SimilarityTransform> make() const {
    const auto s = parse_triple(shift, "--shift");
    if (!(scale > 0.0)) throw ConfigError("--scale must be positive");
    if (yaw_deg == 0.0 && scale == 1.0 && s[0] == 0.0 && s[1] == 0.0 && s[2] == 0.0) return std::nullopt;
    SimilarityTransform t;
    t.rotation = axis_angle(Vec3::UnitZ(), yaw_deg * M_PI / 180.0);
    t.translation = Vec3(s[0], s[1], s[2]);
    t.scale = scale;
    return t;
  }
};

// ---------------------------------------------------------------------------
// Commands

int cmd_build_map(const RunConfig& config, const std::string& input, const std::string& output,
                  std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const PointCloud cloud = read_cloud_csv(input, config.metric);
  const ConstellationMap map = build_map(cloud, config.enumeration);
  OutputSet outputs;
  outputs.stage(output, serialize_map(map));
  outputs.commit();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << "entries " << map.entries().size() << "\n";
  out << "fruits " << map.fruits().size() << "\n";
  out << "seconds " << seconds << "\n";
  return kOk;
}

int cmd_match(const RunConfig& config, const std::string& map_path, const std::string& query_path,
              const std::string& output, std::string pose_output, const std::string& ground_truth,
              bool pose_only, std::ostream& out) {
  const ConstellationMap map = load_map(map_path);
  const PointCloud query = read_cloud_csv(query_path, config.metric);
  std::vector<IdPair> truth;
  if (!ground_truth.empty()) truth = read_pairs_csv(ground_truth);
  if (map.params().k != config.enumeration.k) {
    throw ConfigError("map was built with k=" + std::to_string(map.params().k));
  }

  const MatchResult result = match_clouds(map, query, config.match);

  OutputSet outputs;
  if (pose_only) {
    outputs.stage(output, dump(transform_json(result.transform)));
  } else {
    if (pose_output.empty()) pose_output = pose_path_for(output).string();
    outputs.stage(output, format_matches_csv(result));
    outputs.stage(pose_output, dump(pose_json(result)));
  }
  outputs.commit();

  if (!truth.empty()) {
    out << dump(eval_json(evaluate(result, truth, query, map, config.enumeration.min_frames)));
  } else if (!pose_only) {
    out << "matched " << result.correspondences.size() << " inliers " << result.inlier_ids.size() << "\n";
  }
  return kOk;
}

int cmd_synth_orchard(const RunConfig& config, const OrchardFlags& orchard, double occlusion,
                      double noise, std::uint64_t perturb_seed, const TransformFlags& transform,
                      const std::string& output, const std::string& truth_output, std::ostream& out) {
  PointCloud cloud = orchard.make(config);
  const auto t = transform.make();
  const bool perturbed = occlusion > 0.0 || noise > 0.0 || t.has_value();
  if (perturbed) cloud = perturb(cloud, {occlusion, noise, t, perturb_seed});
  OutputSet outputs;
  outputs.stage(output, format_cloud_csv(cloud));
  if (!truth_output.empty()) {
    std::vector<IdPair> pairs;
    for (const auto& p : cloud.points) pairs.emplace_back(p.id, p.id);
    outputs.stage(truth_output, format_pairs_csv(pairs));
  }
  outputs.commit();
  out << "points " << cloud.points.size() << " span " << scene_span(cloud) << "\n";
  return kOk;
}

int cmd_bench_robustness(const RunConfig& config, const OrchardFlags& orchard,
                         const std::string& occlusion, const std::string& noise, int repeats,
                         bool noise_scaling, const std::string& out_dir, std::ostream& out) {
  const auto occ = parse_range(occlusion, "--occlusion");
  const auto sig = parse_range(noise, "--noise");
  const PointCloud cloud = orchard.make(config);
  NoiseScaling scaling;
  scaling.enabled = noise_scaling;
  const auto rows = occlusion_noise_experiment(cloud, occ, sig, repeats, config.enumeration,
                                               config.match, config.seed, scaling);
  std::ostringstream csv;
  write_robustness_csv(csv, rows);
  json summary = {{"scene_span", scene_span(cloud)},
                  {"points", cloud.points.size()},
                  {"repeats", repeats},
                  {"noise_scaling", noise_scaling},
                  {"params", params_json(config)},
                  {"rows", json::array()}};
  int failures = 0;
  for (const auto& r : rows) {
    failures += r.failures;
    summary["rows"].push_back({{"occlusion_fraction", r.occlusion_fraction},
                               {"noise_std", r.noise_std},
                               {"mean_error", r.mean_error},
                               {"std_error", r.std_error},
                               {"repeats", r.repeats},
                               {"failures", r.failures}});
  }
  ensure_dir(out_dir);
  OutputSet outputs;
  outputs.stage(fs::path(out_dir) / "robustness.csv", csv.str());
  outputs.stage(fs::path(out_dir) / "robustness.json", dump(summary));
  outputs.commit();
  out << "cells " << rows.size() << " failures " << failures << "\n";
  return kOk;
}

int cmd_bench_matching(const RunConfig& config, const OrchardFlags& orchard, double occlusion,
                       double noise, int repeats, const TransformFlags& transform,
                       const std::string& out_dir, std::ostream& out) {
  OrchardSpec spec = orchard.spec;
  spec.seed = config.seed;
  PerturbSpec p{occlusion, noise, transform.make(), config.seed};
  MatchParams params = config.match;
  if (p.transform && p.transform->scale != 1.0) params.ransac.with_scale = true;
  const auto summary = matching_experiment(spec, p, config.enumeration, params, repeats, true);
  json j = {{"mean_precision", summary.mean_precision},
            {"mean_recall", summary.mean_recall},
            {"precision_spread", summary.precision_spread},
            {"failures", summary.failures},
            {"params", params_json(config)},
            {"runs", json::array()}};
  for (const auto& r : summary.runs) j["runs"].push_back(eval_json(r));
  ensure_dir(out_dir);
  OutputSet outputs;
  outputs.stage(fs::path(out_dir) / "matching.json", dump(j));
  outputs.commit();
  out << "precision " << summary.mean_precision << " recall " << summary.mean_recall << "\n";
  return kOk;
}

int cmd_bench_trajectory(const RunConfig& config, const OrchardFlags& orchard, int frames, double x0,
                         double x1, double standoff, double height, double noise,
                         const std::string& out_dir, std::ostream& out) {
  const PointCloud cloud = orchard.make(config);
  TrajectorySpec spec = linear_path(x0, x1, frames, standoff, height);
  spec.detection_noise_std = noise;
  spec.seed = config.seed;
  const auto result = trajectory_experiment(cloud, spec, config.enumeration, config.match);
  std::ostringstream csv;
  write_trajectory_csv(csv, result);
  double max_t = 0.0;
  double max_r = 0.0;
  for (const auto& f : result.frames) {
    if (!f.localized) continue;
    max_t = std::max({max_t, f.tx_err, f.ty_err, f.tz_err});
    max_r = std::max(max_r, f.rot_err_rad);
  }
  json j = {{"frames", result.frames.size()},
            {"failures", result.failures},
            {"translation_rmse", result.translation_rmse},
            {"max_axis_error", max_t},
            {"max_rotation_error_rad", max_r},
            {"params", params_json(config)}};
  ensure_dir(out_dir);
  OutputSet outputs;
  outputs.stage(fs::path(out_dir) / "trajectory.csv", csv.str());
  outputs.stage(fs::path(out_dir) / "trajectory.json", dump(j));
  outputs.commit();
  out << "frames " << result.frames.size() << " failures " << result.failures << " rmse "
      << result.translation_rmse << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fruit re-identification with constellation descriptors"};
  app.require_subcommand(1);

  // build-map
  ConfigFlags build_flags;
  std::string build_input;
  std::string build_output;
  auto* build = app.add_subcommand("build-map", "Build a constellation map from a cloud CSV");
  build->add_option("cloud", build_input, "input cloud CSV")->required();
  build->add_option("--out", build_output, "output map JSON")->required();
  add_config_flags(build, build_flags, false);

  // match / localize
  ConfigFlags match_flags;
  std::string map_path;
  std::string query_path;
  std::string match_output;
  std::string pose_output;
  std::string ground_truth;
  auto* match = app.add_subcommand("match", "Match a query cloud against a map");
  match->add_option("map", map_path, "map JSON")->required();
  match->add_option("query", query_path, "query cloud CSV")->required();
  match->add_option("--out", match_output, "matches CSV")->required();
  match->add_option("--pose-out", pose_output, "pose JSON (default: <out>.pose.json)");
  match->add_option("--ground-truth", ground_truth, "query_id,map_id CSV; prints precision/recall");
  add_config_flags(match, match_flags, true);

  ConfigFlags loc_flags;
  std::string loc_map;
  std::string loc_query;
  std::string loc_output;
  auto* localize = app.add_subcommand("localize", "Estimate only the query-to-map pose");
  localize->add_option("map", loc_map, "map JSON")->required();
  localize->add_option("query", loc_query, "query cloud CSV")->required();
  localize->add_option("--out", loc_output, "pose JSON")->required();
  add_config_flags(localize, loc_flags, true);

  // synth orchard
  auto* synth = app.add_subcommand("synth", "Generate synthetic data");
  synth->require_subcommand(1);
  ConfigFlags synth_flags;
  OrchardFlags synth_orchard;
  TransformFlags synth_transform;
  double synth_occlusion = 0.0;
  double synth_noise = 0.0;
  std::uint64_t synth_perturb_seed = 0;
  std::string synth_output;
  std::string synth_truth;
  auto* orchard = synth->add_subcommand("orchard", "Synthetic orchard cloud, optionally perturbed");
  orchard->add_option("--out", synth_output, "output cloud CSV")->required();
  orchard->add_option("--occlusion", synth_occlusion, "fraction of fruits removed");
  orchard->add_option("--noise", synth_noise, "position noise standard deviation");
  orchard->add_option("--perturb-seed", synth_perturb_seed, "seed for the perturbation");
  orchard->add_option("--ground-truth-out", synth_truth, "write identity ground truth for the output");
  synth_orchard.add(orchard, false);
  synth_transform.add(orchard);
  add_config_flags(orchard, synth_flags, false);

  // bench
  auto* bench = app.add_subcommand("bench", "Run an experiment");
  bench->require_subcommand(1);

  ConfigFlags rob_flags;
  OrchardFlags rob_orchard;
  std::string rob_occlusion = "0:0.45:0.05";
  std::string rob_noise = "0:0.1:0.01";
  int rob_repeats = 5;
  bool rob_fixed = false;
  std::string rob_out;
  auto* robustness = bench->add_subcommand("robustness", "Occlusion and noise sweep");
  robustness->add_option("--occlusion", rob_occlusion, "value or start:stop:step")->capture_default_str();
  robustness->add_option("--noise", rob_noise, "value or start:stop:step")->capture_default_str();
  robustness->add_option("--repeats", rob_repeats, "repeats per cell")->capture_default_str();
  robustness->add_flag("--fixed-tolerances", rob_fixed, "do not widen tolerances with the noise level");
  robustness->add_option("--out", rob_out, "output directory")->required();
  rob_orchard.add(robustness, true);
  add_config_flags(robustness, rob_flags, true);

  ConfigFlags mat_flags;
  OrchardFlags mat_orchard;
  TransformFlags mat_transform;
  double mat_occlusion = 0.2;
  double mat_noise = 0.01;
  int mat_repeats = 10;
  std::string mat_out;
  auto* matching = bench->add_subcommand("matching", "Precision and recall on perturbed copies");
  matching->add_option("--occlusion", mat_occlusion, "fraction of fruits removed")->capture_default_str();
  matching->add_option("--noise", mat_noise, "position noise standard deviation")->capture_default_str();
  matching->add_option("--repeats", mat_repeats, "repeats")->capture_default_str();
  matching->add_option("--out", mat_out, "output directory")->required();
  mat_orchard.add(matching, false);
  mat_transform.add(matching);
  add_config_flags(matching, mat_flags, true);

  ConfigFlags traj_flags;
  OrchardFlags traj_orchard;
  int traj_frames = 20;
  double traj_x0 = 0.0;
  double traj_x1 = 8.0;
  double traj_standoff = 3.0;
  double traj_height = 1.5;
  double traj_noise = 0.0;
  std::string traj_out;
  auto* trajectory = bench->add_subcommand("trajectory", "Localize a camera along a linear path");
  trajectory->add_option("--frames", traj_frames, "number of frames")->capture_default_str();
  trajectory->add_option("--x0", traj_x0, "path start along the row")->capture_default_str();
  trajectory->add_option("--x1", traj_x1, "path end along the row")->capture_default_str();
  trajectory->add_option("--standoff", traj_standoff, "distance in front of the row")->capture_default_str();
  trajectory->add_option("--height", traj_height, "camera height")->capture_default_str();
  trajectory->add_option("--noise", traj_noise, "detection noise standard deviation")->capture_default_str();
  trajectory->add_option("--out", traj_out, "output directory")->required();
  traj_orchard.add(trajectory, true);
  add_config_flags(trajectory, traj_flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*build) return cmd_build_map(resolve_config(build_flags), build_input, build_output, out);
    if (*match) {
      return cmd_match(resolve_config(match_flags), map_path, query_path, match_output, pose_output,
                       ground_truth, false, out);
    }
    if (*localize) return cmd_match(resolve_config(loc_flags), loc_map, loc_query, loc_output, "", "", true, out);
    if (*orchard) {
      return cmd_synth_orchard(resolve_config(synth_flags), synth_orchard, synth_occlusion, synth_noise,
                               synth_perturb_seed, synth_transform, synth_output, synth_truth, out);
    }
    if (*robustness) {
      return cmd_bench_robustness(resolve_config(rob_flags), rob_orchard, rob_occlusion, rob_noise,
                                  rob_repeats, !rob_fixed, rob_out, out);
    }
    if (*matching) {
      return cmd_bench_matching(resolve_config(mat_flags), mat_orchard, mat_occlusion, mat_noise,
                                mat_repeats, mat_transform, mat_out, out);
    }
    if (*trajectory) {
      return cmd_bench_trajectory(resolve_config(traj_flags), traj_orchard, traj_frames, traj_x0, traj_x1,
                                  traj_standoff, traj_height, traj_noise, traj_out, out);
    }
  } catch (const InsufficientPointsError& e) {
    err << "error: " << e.what() << "\n";
    return kTooFewPoints;
  } catch (const InsufficientMatchesError& e) {
    err << "error: " << e.what() << "\n";
    return kInsufficientMatches;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace constel::cli
