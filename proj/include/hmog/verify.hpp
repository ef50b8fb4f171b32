#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hmog/features.hpp"
#include "hmog/pipeline.hpp"

namespace hmog {

/// Sum of |v - mu| / sigma.
template <typename DV, typename DM, typename DS>
typename DV::Scalar scaled_manhattan(const Eigen::MatrixBase<DV>& v,
                                     const Eigen::MatrixBase<DM>& mu,
                                     const Eigen::MatrixBase<DS>& sigma) {
  return (v - mu).cwiseAbs().cwiseQuotient(sigma).sum();
}

/// Euclidean norm of (v - mu) / sigma.
template <typename DV, typename DM, typename DS>
typename DV::Scalar scaled_euclidean(const Eigen::MatrixBase<DV>& v,
                                     const Eigen::MatrixBase<DM>& mu,
                                     const Eigen::MatrixBase<DS>& sigma) {
  return (v - mu).cwiseQuotient(sigma).norm();
}

enum class Verifier : std::uint8_t { scaled_manhattan, scaled_euclidean };

std::string_view verifier_name(Verifier v);
std::optional<Verifier> parse_verifier(std::string_view name);

/// Distance of a scoring-space vector from the template. Throws a data error
/// on dimension mismatch.
double score(const Template& t, const Eigen::Ref<const Eigen::VectorXd>& projected,
             Verifier verifier);

/// One comparison of an authentication vector against a claimed template.
struct ScoreEntry {
  std::string claimed;
  std::string actual;
  std::string session;
  Millis t_ms = 0;
  double score = 0.0;

  bool genuine() const { return claimed == actual; }
  friend bool operator==(const ScoreEntry&, const ScoreEntry&) = default;
};

struct ScoreSet {
  std::vector<ScoreEntry> genuine;
  std::vector<ScoreEntry> impostor;

  std::vector<double> genuine_scores() const;
  std::vector<double> impostor_scores() const;
};

/// Scores every authentication vector against its own template (genuine) and
/// every other template (zero-effort impostor). Vectors of users without a
/// template are skipped. Output order: by row, then by template order.
ScoreSet gen_scores(std::span<const Template> templates, const FeatureMatrix& auth,
                    Verifier verifier);

// --- Error rates -------------------------------------------------------------

struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

/// Accept when distance <= threshold. One point per distinct pooled score in
/// ascending order, preceded by the reject-all point at -infinity.
/// Throws a data error when either list is empty.
std::vector<DetPoint> det_curve(std::span<const double> genuine,
                                std::span<const double> impostor);

/// Rate where FAR and FRR cross, interpolated linearly between the two DET
/// points bracketing the crossing.
double eer(std::span<const double> genuine, std::span<const double> impostor);
double eer(const ScoreSet& scores);

/// FAR and FRR when accepting distances <= threshold.
DetPoint rates_at(std::span<const double> genuine, std::span<const double> impostor,
                  double threshold);

void write_scores_csv(std::ostream& out, const ScoreSet& scores);
ScoreSet read_scores_csv(std::istream& in);
void write_det_csv(std::ostream& out, std::span<const DetPoint> curve);

// --- Fusion ------------------------------------------------------------------

/// Maps [min, max] onto [0, 1]; a degenerate range maps everything to 0.
struct MinMax {
  double min = 0.0;
  double max = 0.0;

  double operator()(double v) const { return max > min ? (v - min) / (max - min) : 0.0; }
};

MinMax fit_min_max(std::span<const double> values);

/// Weighted sum over present (non-empty) normalised channel scores, with the
/// weights renormalised over the present channels. If every present channel has
/// zero weight, present channels are weighted equally. Throws a data error if no
/// channel is present or sizes differ.
double fuse(std::span<const std::optional<double>> normalized,
            std::span<const double> weights);

/// Channel scores aligned on (claimed, actual, session, t_ms).
struct FusionTable {
  std::vector<std::string> channels;
  std::vector<ScoreEntry> keys;  // score field unused
  /// keys x channels, normalised; NaN where the channel has no score.
  Eigen::MatrixXd scores;
  /// Per-channel normalisation bounds over the pooled scores.
  std::vector<MinMax> bounds;
};

FusionTable align_scores(std::span<const std::string> channels,
                         std::span<const ScoreSet> sets);

ScoreSet fuse_table(const FusionTable& table, std::span<const double> weights);

/// Every weight vector on the simplex with the given step, in lexicographic
/// order of (w_0, w_1, ...) descending from w_0 = 1.
std::vector<std::vector<double>> simplex_grid(std::size_t channels, double step);

struct FusionSearch {
  std::vector<double> weights;
  double eer = 0.0;
};

/// Lowest-EER weights over simplex_grid; the first grid point wins ties.
FusionSearch search_fusion_weights(const FusionTable& table, double step = 0.05);

}  // namespace hmog
