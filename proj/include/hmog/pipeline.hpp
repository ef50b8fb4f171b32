#pragma once

#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hmog/error.hpp"
#include "hmog/features.hpp"

namespace hmog {

/// Lower bound applied to every standard deviation used for scaling.
inline constexpr double kSigmaFloor = 1e-6;

/// Users with fewer training vectors fail to enroll.
inline constexpr std::size_t kMinEnrollmentVectors = 80;

/// Feature-wise population mean and standard deviation over the valid (non-NaN)
/// entries of each column. Columns without valid entries get NaN.
template <typename Derived>
std::pair<Eigen::VectorXd, Eigen::VectorXd> nan_mean_stdev(
    const Eigen::MatrixBase<Derived>& x) {
  const Eigen::Index d = x.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Constant(d, kInvalid);
  Eigen::VectorXd stdev = Eigen::VectorXd::Constant(d, kInvalid);
  for (Eigen::Index c = 0; c < d; ++c) {
    double sum = 0.0;
    Eigen::Index n = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (is_valid(x(r, c))) {
        sum += x(r, c);
        ++n;
      }
    }
    if (n == 0) continue;
    const double mu = sum / double(n);
    double ss = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (is_valid(x(r, c))) ss += (x(r, c) - mu) * (x(r, c) - mu);
    }
    mean[c] = mu;
    stdev[c] = std::sqrt(ss / double(n));
  }
  return {mean, stdev};
}

// --- Feature selection -----------------------------------------------------

/// Ratio of between-user variance of the per-user means to the average
/// per-user variance (population forms, floored denominator). Labels are the
/// matrix's user ids. Throws a data error with fewer than two users.
Eigen::VectorXd fisher_scores(const FeatureMatrix& x);

/// Indices of the highest-scoring features, best first, forming the shortest
/// prefix whose score sum reaches `fraction` of the total. Ties keep column
/// order. fraction >= 1 selects every feature.
std::vector<Eigen::Index> select_by_fisher(const Eigen::VectorXd& scores,
                                           double fraction);

/// Equal-frequency discretisation into `bins` bins; NaN maps to bin `bins`.
std::vector<int> discretize_equal_frequency(const Eigen::Ref<const Eigen::VectorXd>& column,
                                            int bins = 10);

/// Mutual information in bits between two discrete label sequences.
double mutual_information(std::span<const int> a, std::span<const int> b);

/// Greedy mRMR (difference form): at each step adds the feature maximising
/// relevance minus mean redundancy with the features already chosen, and stops
/// when the best score is <= threshold. Indices in selection order.
std::vector<Eigen::Index> mrmr_select(const FeatureMatrix& x, double threshold,
                                      int bins = 10);

// --- PCA ---------------------------------------------------------------------

struct PcaBasis {
  Eigen::VectorXd mean;
  /// d x k, orthonormal columns sorted by decreasing variance.
  Eigen::MatrixXd components;
  /// Eigenvalues (sample covariance) of the retained components.
  Eigen::VectorXd variances;
  /// Fraction of total variance explained by each retained component.
  Eigen::VectorXd variance_fraction;

  Eigen::Index dimension() const { return components.cols(); }
};

/// Fits on the rows of `x`, keeping the fewest leading components whose
/// cumulative variance reaches `variance_fraction` of the total. Throws a data
/// error on fewer than two rows or a zero covariance.
PcaBasis pca_fit(const Eigen::Ref<const Eigen::MatrixXd>& x, double variance_fraction);

/// Projection of a centred vector onto the basis.
Eigen::VectorXd pca_transform(const PcaBasis& basis,
                              const Eigen::Ref<const Eigen::VectorXd>& v);
Eigen::VectorXd pca_reconstruct(const PcaBasis& basis,
                                const Eigen::Ref<const Eigen::VectorXd>& components);

// --- Templates ---------------------------------------------------------------

enum class Selector : std::uint8_t { none, fisher, mrmr };

struct PipelineParams {
  Selector selector = Selector::none;
  double fisher_fraction = 1.0;
  double mrmr_threshold = 0.0;
  std::optional<double> pca_fraction;
  double scan_seconds = 60.0;
  /// Keystroke latency filter: longest kept latency and minimum occurrences.
  double l_ms = std::numeric_limits<double>::infinity();
  std::size_t m_min = 0;

  friend bool operator==(const PipelineParams&, const PipelineParams&) = default;
};

/// Throws a config error for out-of-range parameters.
void validate(const PipelineParams& params);
std::string describe(const PipelineParams& params);

/// Runs the configured selector over a population training matrix.
std::vector<Eigen::Index> select_features(const FeatureMatrix& training,
                                          const PipelineParams& params);

class EnrollmentFailure : public Error {
 public:
  EnrollmentFailure(std::string user, const std::string& what)
      : Error(ErrorKind::infeasible, what), user_(std::move(user)) {}
  const std::string& user() const { return user_; }

 private:
  std::string user_;
};

/// Per-user enrollment model.
struct Template {
  std::string user_id;
  /// Source feature names the template reads, in order.
  std::vector<std::string> features;
  /// Feature-wise mean and (floored) standard deviation over training vectors.
  Eigen::VectorXd mean;
  Eigen::VectorXd stdev;
  /// Basis fitted on standardised training vectors, when PCA is enabled.
  std::optional<PcaBasis> pca;
  /// Mean and floored standard deviation in the space scores are computed in
  /// (equal to mean/stdev without PCA).
  Eigen::VectorXd score_mean;
  Eigen::VectorXd score_stdev;
  std::size_t count = 0;
  PipelineParams params;

  /// Position of each template feature in `source_columns`, or -1 where the
  /// source lacks it (treated as an invalid cell).
  std::vector<Eigen::Index> resolve(const std::vector<std::string>& source_columns) const;

  /// Maps a source row into scoring space: picks this template's features
  /// (positions from resolve()), imputes invalid cells with the template mean,
  /// then applies standardisation and PCA when enabled.
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                          std::span<const Eigen::Index> source_index) const;
};

/// Builds a template from one user's training rows restricted to `selected`
/// columns, after the params' latency filter (a no-op by default). Features without any valid training value are dropped. Throws
/// EnrollmentFailure below `min_vectors` rows or when nothing usable remains.
Template build_template(const FeatureMatrix& training,
                        std::span<const Eigen::Index> selected,
                        const PipelineParams& params,
                        std::size_t min_vectors = kMinEnrollmentVectors);

void write_templates(std::ostream& out, std::span<const Template> templates);
std::vector<Template> read_templates(std::istream& in);

// --- Authentication vectors -----------------------------------------------------

/// Splits each session's timeline into consecutive `seconds`-long windows
/// starting at `origin` (default: the session's first timestamp) and averages
/// the vectors in each nonempty window, ignoring invalid cells. Rows are
/// stamped with the window start.
FeatureMatrix scan_aggregate(const FeatureMatrix& vectors, double seconds,
                             std::optional<Millis> origin = std::nullopt);

/// Dense counterpart of latency_outlier_filter: marks values above `l_ms`
/// invalid, clears columns left with fewer than `m_min` valid values, then drops
/// rows without any valid cell.
FeatureMatrix latency_filter(const FeatureMatrix& x, double l_ms, std::size_t m_min);

/// Marks cells outside [Q1 - k IQR, Q3 + k IQR] of their column as invalid.
FeatureMatrix iqr_trim(const FeatureMatrix& x, double k = 1.5);

}  // namespace hmog
