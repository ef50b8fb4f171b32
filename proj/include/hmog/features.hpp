#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hmog/corpus.hpp"

namespace hmog {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();

inline bool is_valid(double v) { return !std::isnan(v); }

/// Observation vectors (rows) over named features (columns), labelled with
/// user, session and timestamp. Invalid cells hold NaN.
struct FeatureMatrix {
  std::vector<std::string> columns;
  RowMatrix values;
  std::vector<std::string> user_ids;
  std::vector<std::string> session_ids;
  std::vector<Millis> t_ms;

  FeatureMatrix() = default;
  explicit FeatureMatrix(std::vector<std::string> names)
      : columns(std::move(names)), values(0, Eigen::Index(columns.size())) {}

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  std::optional<Eigen::Index> column_index(const std::string& name) const;

  FeatureMatrix select_rows(std::span<const Eigen::Index> rows) const;
  FeatureMatrix select_columns(std::span<const Eigen::Index> cols) const;
  /// Rows whose user_id matches.
  FeatureMatrix rows_of_user(const std::string& user) const;
};

/// Accumulates rows, then produces a FeatureMatrix in one allocation.
class FeatureMatrixBuilder {
 public:
  explicit FeatureMatrixBuilder(std::vector<std::string> columns);

  void add(const std::string& user, const std::string& session, Millis t,
           std::span<const double> row);
  std::size_t size() const { return t_.size(); }
  FeatureMatrix build() &&;

 private:
  std::vector<std::string> columns_;
  std::vector<double> data_;
  std::vector<std::string> users_;
  std::vector<std::string> sessions_;
  std::vector<Millis> t_;
};

/// Row-wise concatenation; column lists must match.
FeatureMatrix concat_rows(std::span<const FeatureMatrix> parts);

/// Header `user_id,session_id,t_ms,<features>`; invalid cells are empty.
void write_feature_csv(std::ostream& out, const FeatureMatrix& m);
FeatureMatrix read_feature_csv(std::istream& in);

/// One observed value of a sparse feature (key hold or digraph latency).
struct SparseFeatureRow {
  std::string user_id;
  std::string session_id;
  Millis t_ms = 0;
  std::string feature;
  double value = 0.0;

  friend bool operator==(const SparseFeatureRow&, const SparseFeatureRow&) = default;
};

/// Long form: `user_id,session_id,t_ms,feature_name,value`.
void write_sparse_csv(std::ostream& out, std::span<const SparseFeatureRow> rows);
std::vector<SparseFeatureRow> read_sparse_csv(std::istream& in);

/// One dense row per sparse row, with the value in its feature's column and
/// NaN elsewhere. Rows whose feature is not in `columns` are dropped.
FeatureMatrix to_dense(std::span<const SparseFeatureRow> rows,
                       const std::vector<std::string>& columns);

}  // namespace hmog
