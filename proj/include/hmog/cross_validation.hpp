#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hmog/features.hpp"
#include "hmog/pipeline.hpp"
#include "hmog/verify.hpp"

namespace hmog {

struct CvOptions {
  std::size_t folds = 10;
  /// Enrollment floor inside folds; folds hold a fraction of the training data.
  std::size_t min_vectors = 2;
  Verifier verifier = Verifier::scaled_manhattan;
  std::optional<Millis> scan_origin;
};

/// Fold id per row: each user's rows, in matrix order, are cut into `folds`
/// contiguous blocks of near-equal size.
std::vector<std::size_t> chronological_folds(const FeatureMatrix& x, std::size_t folds);

struct CvResult {
  std::size_t chosen = 0;
  PipelineParams params;
  /// Mean fold EER per [scan length][grid point].
  std::vector<std::vector<double>> mean_eer;
  /// Winning grid point per scan length.
  std::vector<std::size_t> winners;
  /// Mean number of selected features per grid point.
  std::vector<double> feature_count;
};

/// Most-voted grid point; ties go to fewer features, then the lower PCA
/// fraction (no PCA counts as 1.0), then grid order.
std::size_t majority_vote(std::span<const std::size_t> winners,
                          std::span<const double> feature_count,
                          std::span<const PipelineParams> grid);

/// Scores every grid point on every fold and scan length. A grid point that
/// cannot be evaluated on a fold (no features, fewer than two enrolled users,
/// no scores) counts as EER 0.5 there.
CvResult cross_validate(const FeatureMatrix& training, std::span<const PipelineParams> grid,
                        std::span<const double> scan_seconds, const CvOptions& options = {});

}  // namespace hmog
