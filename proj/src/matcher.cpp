#include "constel/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include "constel/assignment.hpp"
#include "constel/errors.hpp"
#include "constel/max_clique.hpp"

namespace constel {

std::string_view stage_name(MatchStage stage) {
  switch (stage) {
    case MatchStage::kHungarian:
      return "hungarian";
    case MatchStage::kCliqueSurvivor:
      return "clique-survivor";
    case MatchStage::kCompleted:
      return "completed";
  }
  return "unknown";
}

void MatchParams::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (min_votes < 1) throw ConfigError("min_votes must be >= 1");
  if (!(clique_epsilon > 0.0)) throw ConfigError("clique_epsilon must be > 0");
  if (!(clique_log_epsilon > 0.0)) throw ConfigError("clique_log_epsilon must be > 0");
  if (completion_radius < 0.0) throw ConfigError("completion_radius must be >= 0");
  if (candidates_m < 1 || candidates_m > 5) throw ConfigError("candidates_m must be in [1, 5]");
  if (window_size < 0.0) throw ConfigError("window_size must be >= 0");
  ransac.validate();
}

VoteMatrix vote_correspondences(const ConstellationMap& map, const PointCloud& query,
                                const MatchParams& params, MatchStats* stats) {
  VoteMatrix votes;
  const auto described = enumerate_described(query, map.params());
  std::size_t matched = 0;
  for (const auto& dc : described) {
    const auto hits = map.query_nearest(dc.descriptor, params.tau, params.candidates_m);
    if (!hits.empty()) ++matched;
    for (const auto& hit : hits) {
      const auto& members = map.entries()[hit.entry].member_ids;
      for (std::size_t i = 0; i < members.size(); ++i) {
        ++votes[{dc.constellation.member_ids[i], members[i]}];
      }
    }
  }
  if (stats) {
    stats->query_constellations = described.size();
    stats->matched_constellations = matched;
    stats->vote_cells = votes.size();
  }
  return votes;
}

std::vector<IdPair> assign_hungarian(const VoteMatrix& votes, int min_votes) {
  // Split the bipartite support graph into connected components and solve
  // each independently.
  std::vector<std::pair<IdPair, int>> cells;
  for (const auto& [key, count] : votes) {
    if (count >= min_votes) cells.emplace_back(key, count);
  }
  std::map<FruitId, std::size_t> row_of;
  std::map<FruitId, std::size_t> col_of;
  for (const auto& [key, count] : cells) {
    row_of.emplace(key.first, 0);
    col_of.emplace(key.second, 0);
  }
  std::vector<FruitId> row_ids;
  std::vector<FruitId> col_ids;
  for (auto& [id, idx] : row_of) {
    idx = row_ids.size();
    row_ids.push_back(id);
  }
  for (auto& [id, idx] : col_of) {
    idx = col_ids.size();
    col_ids.push_back(id);
  }

  // Union-find over rows [0, R) and columns [R, R + C).
  std::vector<std::size_t> parent(row_ids.size() + col_ids.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [key, count] : cells) {
    const std::size_t a = find(row_of[key.first]);
    const std::size_t b = find(row_ids.size() + col_of[key.second]);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }

  std::map<std::size_t, std::vector<std::pair<IdPair, int>>> components;
  for (const auto& cell : cells) components[find(row_of[cell.first.first])].push_back(cell);

  std::vector<IdPair> out;
  for (const auto& [root, comp] : components) {
    std::vector<FruitId> rows;
    std::vector<FruitId> cols;
    for (const auto& [key, count] : comp) {
      rows.push_back(key.first);
      cols.push_back(key.second);
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    auto index_in = [](const std::vector<FruitId>& v, FruitId id) {
      return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), id) - v.begin());
    };
    AssignmentCosts costs(rows.size(), std::vector<std::optional<std::int64_t>>(cols.size()));
    for (const auto& [key, count] : comp) {
      costs[index_in(rows, key.first)][index_in(cols, key.second)] = -static_cast<std::int64_t>(count);
    }
    const auto assignment = solve_assignment(costs);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (assignment[r] >= 0) out.emplace_back(rows[r], cols[static_cast<std::size_t>(assignment[r])]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

Vec3 position(const CloudIndex& index, FruitId id) {
  const auto pos = index.position_of(id);
  if (!pos) throw InvalidCloudError("unknown fruit id " + std::to_string(id));
  return index.points()[*pos].position;
}

}  // namespace

std::vector<IdPair> clique_filter(const std::vector<IdPair>& correspondences,
                                  const CloudIndex& query, const CloudIndex& map_fruits,
                                  const ConsistencyModel& model) {
  const std::size_t n = correspondences.size();
  if (n <= 1) return correspondences;
  std::vector<Vec3> q(n);
  std::vector<Vec3> m(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = position(query, correspondences[i].first);
    m[i] = position(map_fruits, correspondences[i].second);
  }

  std::vector<double> dq(n * n);
  std::vector<double> dm(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dq[i * n + j] = (q[i] - q[j]).norm();
      dm[i * n + j] = (m[i] - m[j]).norm();
    }
  }

  double log_scale = 0.0;
  if (model.scale_free) {
    std::vector<double> logs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (dq[i * n + j] > 0.0 && dm[i * n + j] > 0.0) {
          logs.push_back(std::log(dq[i * n + j] / dm[i * n + j]));
        }
      }
    }
    if (!logs.empty()) {
      const auto mid = logs.begin() + static_cast<std::ptrdiff_t>(logs.size() / 2);
      std::nth_element(logs.begin(), mid, logs.end());
      log_scale = *mid;
      if (logs.size() % 2 == 0) {
        log_scale = 0.5 * (log_scale + *std::max_element(logs.begin(), mid));
      }
    }
  }

  CliqueGraph graph(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = dq[i * n + j];
      const double b = dm[i * n + j];
      double discrepancy;
      if (!model.scale_free) {
        discrepancy = std::abs(a - b);
      } else if (a > 0.0 && b > 0.0) {
        discrepancy = std::abs(std::log(a / b) - log_scale);
      } else {
        discrepancy = (a == 0.0 && b == 0.0) ? 0.0 : std::numeric_limits<double>::infinity();
      }
      if (discrepancy <= model.epsilon) graph.add_edge(i, j, discrepancy);
    }
  }

  const auto clique = max_clique(graph);
  std::vector<IdPair> out;
  out.reserve(clique.size());
  for (auto v : clique) out.push_back(correspondences[v]);
  return out;
}

PoseEstimate estimate_pose(const std::vector<IdPair>& correspondences, const CloudIndex& query,
                           const CloudIndex& map_fruits, bool both_metric,
                           const RansacParams& ransac) {
  if (correspondences.size() < 3) {
    throw NoConsensusError("estimate_pose: need at least 3 correspondences");
  }
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  src.reserve(correspondences.size());
  dst.reserve(correspondences.size());
  for (const auto& [qid, mid] : correspondences) {
    src.push_back(position(query, qid));
    dst.push_back(position(map_fruits, mid));
  }
  RansacParams params = ransac;
  params.with_scale = !both_metric;
  const auto fit = ransac_transform(src, dst, params);
  PoseEstimate out;
  out.transform = fit.transform;
  for (auto i : fit.inliers) out.inliers.push_back(correspondences[i]);
  return out;
}

namespace {

struct Candidate {
  double distance;
  FruitId query_id;
  FruitId map_id;
  bool operator<(const Candidate& o) const {
    if (distance != o.distance) return distance < o.distance;
    if (query_id != o.query_id) return query_id < o.query_id;
    return map_id < o.map_id;
  }
};

// Greedy one-to-one completion with a per-query-fruit transform.
template <typename TransformFor>
std::vector<IdPair> greedy_complete(const std::vector<IdPair>& matched, const CloudIndex& query,
                                    const CloudIndex& map_fruits, double radius,
                                    TransformFor&& transform_for) {
  std::set<FruitId> used_q;
  std::set<FruitId> used_m;
  for (const auto& [q, m] : matched) {
    used_q.insert(q);
    used_m.insert(m);
  }
  std::vector<Candidate> candidates;
  for (const auto& fp : query.points()) {
    if (used_q.count(fp.id)) continue;
    const Vec3 mapped = apply(transform_for(fp), fp.position);
    for (const auto& [mid, dist] : map_fruits.within(mapped, radius)) {
      if (!used_m.count(mid)) candidates.push_back({dist, fp.id, mid});
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<IdPair> added;
  for (const auto& c : candidates) {
    if (used_q.count(c.query_id) || used_m.count(c.map_id)) continue;
    used_q.insert(c.query_id);
    used_m.insert(c.map_id);
    added.emplace_back(c.query_id, c.map_id);
  }
  std::sort(added.begin(), added.end());
  return added;
}

}  // namespace

std::vector<IdPair> complete_matches(const SimilarityTransform& transform,
                                     const std::vector<IdPair>& matched, const CloudIndex& query,
                                     const CloudIndex& map_fruits, double radius) {
  return greedy_complete(matched, query, map_fruits, radius,
                         [&](const FruitPoint&) -> const SimilarityTransform& { return transform; });
}

MatchResult match_clouds(const ConstellationMap& map, const PointCloud& query,
                         const MatchParams& params) {
  params.validate();
  query.validate();
  if (query.points.size() < static_cast<std::size_t>(map.params().k)) {
    throw InsufficientPointsError("query cloud has fewer than k points");
  }

  MatchResult result;
  const CloudIndex query_index(query.points);
  const CloudIndex& map_index = map.fruit_index();

  const auto votes = vote_correspondences(map, query, params, &result.stats);
  auto assigned = assign_hungarian(votes, params.min_votes);
  result.stats.hungarian = assigned.size();
  if (assigned.size() < 3) {
    throw InsufficientMatchesError("only " + std::to_string(assigned.size()) +
                                   " correspondences after assignment");
  }

  const bool both_metric = query.metric && map.source().metric;
  MatchStage stage = MatchStage::kHungarian;
  if (params.clique_filter) {
    const ConsistencyModel model{!both_metric,
                                 both_metric ? params.clique_epsilon : params.clique_log_epsilon};
    assigned = clique_filter(assigned, query_index, map_index, model);
    stage = MatchStage::kCliqueSurvivor;
  }
  result.stats.clique_survivors = assigned.size();
  if (assigned.size() < 3) {
    throw InsufficientMatchesError("only " + std::to_string(assigned.size()) +
                                   " correspondences survive consistency filtering");
  }

  RansacParams ransac = params.ransac;
  ransac.seed = params.seed;
  PoseEstimate pose;
  try {
    pose = estimate_pose(assigned, query_index, map_index, both_metric, ransac);
  } catch (const NoConsensusError& e) {
    throw InsufficientMatchesError(std::string("pose estimation failed: ") + e.what());
  }
  result.transform = pose.transform;
  result.stats.ransac_inliers = pose.inliers.size();
  double sq = 0.0;
  for (const auto& [qid, mid] : pose.inliers) {
    result.inlier_ids.push_back(qid);
    sq += (apply(pose.transform, position(query_index, qid)) - position(map_index, mid)).squaredNorm();
  }
  result.stats.inlier_rms = std::sqrt(sq / static_cast<double>(pose.inliers.size()));

  const double radius = params.effective_completion_radius();
  std::vector<IdPair> completed;
  if (params.window_size > 0.0) {
    // Local transforms per cubic window of the query cloud; windows with too
    // few inliers fall back to the global transform.
    const double w = params.window_size;
    auto cell_of = [w](const Vec3& p) {
      return std::array<long long, 3>{static_cast<long long>(std::floor(p.x() / w)),
                                      static_cast<long long>(std::floor(p.y() / w)),
                                      static_cast<long long>(std::floor(p.z() / w))};
    };
    std::map<std::array<long long, 3>, SimilarityTransform> local;
    std::map<std::array<long long, 3>, bool> tried;
    auto transform_for = [&](const FruitPoint& fp) -> SimilarityTransform {
      const auto cell = cell_of(fp.position);
      if (!tried[cell]) {
        tried[cell] = true;
        std::vector<IdPair> nearby;
        for (const auto& pair : pose.inliers) {
          const Vec3 qp = position(query_index, pair.first);
          if ((qp - fp.position).cwiseAbs().maxCoeff() <= w) nearby.push_back(pair);
        }
        if (nearby.size() >= static_cast<std::size_t>(std::max(3, ransac.min_inliers))) {
          try {
            local[cell] = estimate_pose(nearby, query_index, map_index, both_metric, ransac).transform;
          } catch (const Error&) {
          }
        }
      }
      const auto it = local.find(cell);
      return it != local.end() ? it->second : pose.transform;
    };
    completed = greedy_complete(pose.inliers, query_index, map_index, radius, transform_for);
  } else {
    completed = complete_matches(pose.transform, pose.inliers, query_index, map_index, radius);
  }
  result.stats.completed = completed.size();

  for (const auto& [q, m] : pose.inliers) result.correspondences.push_back({q, m, stage});
  for (const auto& [q, m] : completed) {
    result.correspondences.push_back({q, m, MatchStage::kCompleted});
  }
  std::sort(result.correspondences.begin(), result.correspondences.end(),
            [](const Correspondence& a, const Correspondence& b) { return a.query_id < b.query_id; });
  return result;
}

EvalReport evaluate_pairs(const std::vector<IdPair>& predicted,
                          const std::vector<IdPair>& ground_truth) {
  const std::set<IdPair> truth(ground_truth.begin(), ground_truth.end());
  const std::set<IdPair> pred(predicted.begin(), predicted.end());
  EvalReport r;
  for (const auto& p : pred) {
    if (truth.count(p)) {
      ++r.true_positives;
    } else {
      ++r.false_positives;
    }
  }
  r.false_negatives = truth.size() - r.true_positives;
  const auto tp = static_cast<double>(r.true_positives);
  if (r.true_positives + r.false_positives > 0) {
    r.precision = tp / static_cast<double>(r.true_positives + r.false_positives);
  }
  if (r.true_positives + r.false_negatives > 0) {
    r.recall = tp / static_cast<double>(r.true_positives + r.false_negatives);
  }
  return r;
}

EvalReport evaluate(const MatchResult& result, const std::vector<IdPair>& ground_truth,
                    const PointCloud& query, const ConstellationMap& map, int min_frames) {
  std::set<FruitId> query_ok;
  for (const auto& p : query.points) {
    if (p.frames_seen >= min_frames) query_ok.insert(p.id);
  }
  std::set<FruitId> map_ok;
  for (const auto& p : map.fruits()) {
    if (p.frames_seen >= min_frames) map_ok.insert(p.id);
  }
  auto keep = [&](const IdPair& p) { return query_ok.count(p.first) && map_ok.count(p.second); };

  std::vector<IdPair> predicted;
  for (const auto& c : result.correspondences) {
    if (keep({c.query_id, c.map_id})) predicted.emplace_back(c.query_id, c.map_id);
  }
  std::vector<IdPair> truth;
  for (const auto& p : ground_truth) {
    if (keep(p)) truth.push_back(p);
  }
  return evaluate_pairs(predicted, truth);
}

}  // namespace constel
