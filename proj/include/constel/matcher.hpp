#pragma once

// Fruit re-identification between a constellation map and a query cloud:
// descriptor voting, assignment, geometric consistency filtering, robust pose
// and nearest-neighbour completion.

#include <map>
#include <string_view>
#include <utility>
#include <vector>

#include "constel/constellations.hpp"
#include "constel/geom.hpp"
#include "constel/mapstore.hpp"

namespace constel {

/// (query id, map id) -> number of matched constellations aligning the two.
using VoteMatrix = std::map<std::pair<FruitId, FruitId>, int>;

using IdPair = std::pair<FruitId, FruitId>;  // (query id, map id)

enum class MatchStage { kHungarian, kCliqueSurvivor, kCompleted };

std::string_view stage_name(MatchStage stage);

struct Correspondence {
  FruitId query_id = 0;
  FruitId map_id = 0;
  MatchStage stage = MatchStage::kHungarian;
};

struct MatchParams {
  double tau = 0.05;                  // descriptor distance threshold
  int min_votes = 2;
  double clique_epsilon = 0.05;       // |d_query - d_map| in metric mode
  double clique_log_epsilon = 0.05;   // log-ratio tolerance in scale-free mode
  bool clique_filter = true;
  double completion_radius = 0.0;     // <= 0: use ransac.inlier_threshold
  RansacParams ransac;
  int candidates_m = 1;
  double window_size = 0.0;           // > 0: per-window local transforms for completion
  std::uint64_t seed = 0;             // drives RANSAC

  void validate() const;
  double effective_completion_radius() const {
    return completion_radius > 0.0 ? completion_radius : ransac.inlier_threshold;
  }
};

struct MatchStats {
  std::size_t query_constellations = 0;
  std::size_t matched_constellations = 0;
  std::size_t vote_cells = 0;
  std::size_t hungarian = 0;
  std::size_t clique_survivors = 0;
  std::size_t ransac_inliers = 0;
  std::size_t completed = 0;
  double inlier_rms = 0.0;  // map units
};

struct MatchResult {
  std::vector<Correspondence> correspondences;  // one-to-one, ascending query id
  SimilarityTransform transform;                // query -> map
  std::vector<FruitId> inlier_ids;              // query ids of RANSAC inliers
  MatchStats stats;
};

struct EvalReport {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;  // 0 when nothing was predicted
  double recall = 0.0;     // 0 when nothing was expected
};

VoteMatrix vote_correspondences(const ConstellationMap& map, const PointCloud& query,
                                const MatchParams& params, MatchStats* stats = nullptr);

/// Maximum-vote one-to-one assignment over cells with at least min_votes
/// votes; cells below the threshold are forbidden. Sorted by query id.
std::vector<IdPair> assign_hungarian(const VoteMatrix& votes, int min_votes);

/// Consistency test used by clique_filter.
struct ConsistencyModel {
  bool scale_free = false;  // log-ratio test instead of absolute difference
  double epsilon = 0.05;
};

/// Keeps the correspondences of a maximum clique of the pairwise distance
/// consistency graph. Preserves input order.
std::vector<IdPair> clique_filter(const std::vector<IdPair>& correspondences,
                                  const CloudIndex& query, const CloudIndex& map_fruits,
                                  const ConsistencyModel& model);

struct PoseEstimate {
  SimilarityTransform transform;  // query -> map
  std::vector<IdPair> inliers;
};

/// RANSAC over matched positions; scale is estimated unless both sides are
/// metric. Propagates NoConsensusError.
PoseEstimate estimate_pose(const std::vector<IdPair>& correspondences, const CloudIndex& query,
                           const CloudIndex& map_fruits, bool both_metric,
                           const RansacParams& ransac);

/// Pairs unmatched query fruits with unmatched map fruits within `radius`
/// after transforming, greedily by ascending distance.
std::vector<IdPair> complete_matches(const SimilarityTransform& transform,
                                     const std::vector<IdPair>& matched, const CloudIndex& query,
                                     const CloudIndex& map_fruits, double radius);

/// Full pipeline. Throws InsufficientMatchesError when fewer than 3
/// correspondences reach pose estimation or no consensus is found.
MatchResult match_clouds(const ConstellationMap& map, const PointCloud& query,
                         const MatchParams& params);

/// Precision/recall against a one-to-one ground truth. Fruits seen in fewer
/// than min_frames frames (on either side) are dropped before counting.
EvalReport evaluate(const MatchResult& result, const std::vector<IdPair>& ground_truth,
                    const PointCloud& query, const ConstellationMap& map, int min_frames);

/// Same counting over bare id pairs (no frame filter).
EvalReport evaluate_pairs(const std::vector<IdPair>& predicted,
                          const std::vector<IdPair>& ground_truth);

}  // namespace constel
