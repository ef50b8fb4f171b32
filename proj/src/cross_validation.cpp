#include "hmog/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hmog/parallel.hpp"

namespace hmog {

std::vector<std::size_t> chronological_folds(const FeatureMatrix& x, std::size_t folds) {
  if (folds == 0) throw config_error("cross-validation needs at least one fold");
  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t r = 0; r < x.user_ids.size(); ++r) by_user[x.user_ids[r]].push_back(r);
  std::vector<std::size_t> fold(x.user_ids.size(), 0);
  for (const auto& [user, rows] : by_user) {
    for (std::size_t k = 0; k < rows.size(); ++k) fold[rows[k]] = k * folds / rows.size();
  }
  return fold;
}

std::size_t majority_vote(std::span<const std::size_t> winners,
                          std::span<const double> feature_count,
                          std::span<const PipelineParams> grid) {
  if (winners.empty()) throw config_error("majority vote over no scan lengths");
  std::vector<std::size_t> votes(grid.size(), 0);
  for (auto w : winners) ++votes.at(w);
  std::size_t best = winners.front();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (votes[g] == 0) continue;
    const auto key = [&](std::size_t i) {
      return std::tuple(-static_cast<long>(votes[i]), feature_count[i],
                        grid[i].pca_fraction.value_or(1.0), i);
    };
    if (key(g) < key(best)) best = g;
  }
  return best;
}

namespace {

// Mean fold EER per scan length for one grid point on one fold, plus the
// number of features selected.
struct FoldOutcome {
  std::vector<double> eer;
  double features = 0.0;
};

FoldOutcome evaluate_fold(const FeatureMatrix& train, const FeatureMatrix& test,
                          const PipelineParams& params, std::span<const double> scans,
                          const CvOptions& options) {
  FoldOutcome out{std::vector<double>(scans.size(), 0.5), 0.0};
  try {
    const FeatureMatrix train_limited =
        std::isfinite(params.l_ms) ? latency_filter(train, params.l_ms, 0) : train;
    const auto selected = select_features(train_limited, params);
    out.features = double(selected.size());
    if (selected.empty()) return out;

    std::vector<std::string> users;
    for (const auto& u : train.user_ids) {
      if (std::find(users.begin(), users.end(), u) == users.end()) users.push_back(u);
    }
    std::vector<Template> templates;
    for (const auto& u : users) {
      try {
        templates.push_back(
            build_template(train.rows_of_user(u), selected, params, options.min_vectors));
      } catch (const EnrollmentFailure&) {
      }
    }
    if (templates.size() < 2) return out;

    const FeatureMatrix probe =
        std::isfinite(params.l_ms) ? latency_filter(test, params.l_ms, 0) : test;
    for (std::size_t s = 0; s < scans.size(); ++s) {
      const auto auth = scan_aggregate(probe, scans[s], options.scan_origin);
      const auto scores = gen_scores(templates, auth, options.verifier);
      if (!scores.genuine.empty() && !scores.impostor.empty()) out.eer[s] = eer(scores);
    }
  } catch (const Error&) {
    // Infeasible on this fold: keep the chance-level EER.
  }
  return out;
}

}  // namespace

CvResult cross_validate(const FeatureMatrix& training, std::span<const PipelineParams> grid,
                        std::span<const double> scan_seconds, const CvOptions& options) {
  if (grid.empty()) throw config_error("cross-validation grid is empty");
  if (scan_seconds.empty()) throw config_error("cross-validation needs scan lengths");
  for (const auto& p : grid) validate(p);

  const auto fold_of = chronological_folds(training, options.folds);
  std::vector<FeatureMatrix> train(options.folds);
  std::vector<FeatureMatrix> test(options.folds);
  for (std::size_t f = 0; f < options.folds; ++f) {
    std::vector<Eigen::Index> in;
    std::vector<Eigen::Index> out;
    for (std::size_t r = 0; r < fold_of.size(); ++r) {
      (fold_of[r] == f ? out : in).push_back(Eigen::Index(r));
    }
    train[f] = training.select_rows(in);
    test[f] = training.select_rows(out);
  }

  const std::size_t jobs = grid.size() * options.folds;
  std::vector<FoldOutcome> outcomes(jobs);
  parallel_for(jobs, [&](std::size_t j) {
    const std::size_t g = j / options.folds;
    const std::size_t f = j % options.folds;
    outcomes[j] = evaluate_fold(train[f], test[f], grid[g], scan_seconds, options);
  });

  CvResult result;
  result.mean_eer.assign(scan_seconds.size(), std::vector<double>(grid.size(), 0.0));
  result.feature_count.assign(grid.size(), 0.0);
  for (std::size_t j = 0; j < jobs; ++j) {
    const std::size_t g = j / options.folds;
    for (std::size_t s = 0; s < scan_seconds.size(); ++s) {
      result.mean_eer[s][g] += outcomes[j].eer[s] / double(options.folds);
    }
    result.feature_count[g] += outcomes[j].features / double(options.folds);
  }
  for (const auto& row : result.mean_eer) {
    result.winners.push_back(
        std::size_t(std::min_element(row.begin(), row.end()) - row.begin()));
  }
  result.chosen = majority_vote(result.winners, result.feature_count, grid);
  result.params = grid[result.chosen];
  return result;
}

}  // namespace hmog
