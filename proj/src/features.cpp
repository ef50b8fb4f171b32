#include "hmog/features.hpp"

#include <unordered_map>

#include "hmog/csv.hpp"
#include "hmog/error.hpp"

namespace hmog {

std::optional<Eigen::Index> FeatureMatrix::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return Eigen::Index(i);
  }
  return std::nullopt;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const Eigen::Index> rows) const {
  FeatureMatrix out(columns);
  out.values.resize(Eigen::Index(rows.size()), cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    out.values.row(Eigen::Index(i)) = values.row(r);
    out.user_ids.push_back(user_ids[std::size_t(r)]);
    out.session_ids.push_back(session_ids[std::size_t(r)]);
    out.t_ms.push_back(t_ms[std::size_t(r)]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const Eigen::Index> cols) const {
  std::vector<std::string> names;
  for (auto c : cols) names.push_back(columns[std::size_t(c)]);
  FeatureMatrix out(std::move(names));
  out.values.resize(rows(), Eigen::Index(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.values.col(Eigen::Index(j)) = values.col(cols[j]);
  }
  out.user_ids = user_ids;
  out.session_ids = session_ids;
  out.t_ms = t_ms;
  return out;
}

FeatureMatrix FeatureMatrix::rows_of_user(const std::string& user) const {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < user_ids.size(); ++i) {
    if (user_ids[i] == user) idx.push_back(Eigen::Index(i));
  }
  return select_rows(idx);
}

FeatureMatrixBuilder::FeatureMatrixBuilder(std::vector<std::string> columns)
    : columns_(std::move(columns)) {}

void FeatureMatrixBuilder::add(const std::string& user, const std::string& session,
                               Millis t, std::span<const double> row) {
  if (row.size() != columns_.size()) {
    throw std::invalid_argument("feature row width mismatch");
  }
  data_.insert(data_.end(), row.begin(), row.end());
  users_.push_back(user);
  sessions_.push_back(session);
  t_.push_back(t);
}

FeatureMatrix FeatureMatrixBuilder::build() && {
  FeatureMatrix m(std::move(columns_));
  m.values = Eigen::Map<const RowMatrix>(data_.data(), Eigen::Index(t_.size()),
                                         Eigen::Index(m.columns.size()));
  m.user_ids = std::move(users_);
  m.session_ids = std::move(sessions_);
  m.t_ms = std::move(t_);
  return m;
}

FeatureMatrix concat_rows(std::span<const FeatureMatrix> parts) {
  if (parts.empty()) return {};
  FeatureMatrixBuilder b(parts.front().columns);
  std::vector<double> row(parts.front().columns.size());
  for (const auto& p : parts) {
    if (p.columns != parts.front().columns) {
      throw std::invalid_argument("concat_rows: column mismatch");
    }
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      Eigen::Map<Eigen::RowVectorXd>(row.data(), p.cols()) = p.values.row(r);
      b.add(p.user_ids[std::size_t(r)], p.session_ids[std::size_t(r)],
            p.t_ms[std::size_t(r)], row);
    }
  }
  return std::move(b).build();
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& m) {
  out << "user_id,session_id,t_ms";
  for (const auto& c : m.columns) out << ',' << c;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << m.user_ids[std::size_t(r)] << ',' << m.session_ids[std::size_t(r)]
        << ',' << m.t_ms[std::size_t(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out << ',' << format_double(m.values(r, c));
    }
    out << '\n';
  }
}

FeatureMatrix read_feature_csv(std::istream& in) {
  CsvReader csv(in, "feature csv");
  const auto& header = csv.header();
  if (header.size() < 3 || header[0] != "user_id" || header[1] != "session_id" ||
      header[2] != "t_ms") {
    throw data_error("feature csv: header must start with user_id,session_id,t_ms");
  }
  FeatureMatrixBuilder b({header.begin() + 3, header.end()});
  std::vector<double> row(header.size() - 3);
  while (csv.next()) {
    for (std::size_t c = 3; c < header.size(); ++c) {
      row[c - 3] = trim(csv.field(c)).empty() ? kInvalid : csv.number(c);
    }
    b.add(trim(csv.field(0)), trim(csv.field(1)), csv.integer(2), row);
  }
  return std::move(b).build();
}

void write_sparse_csv(std::ostream& out, std::span<const SparseFeatureRow> rows) {
  out << "user_id,session_id,t_ms,feature_name,value\n";
  for (const auto& r : rows) {
    out << r.user_id << ',' << r.session_id << ',' << r.t_ms << ',' << r.feature
        << ',' << format_double(r.value) << '\n';
  }
}

std::vector<SparseFeatureRow> read_sparse_csv(std::istream& in) {
  CsvReader csv(in, "sparse feature csv");
  const auto c_user = csv.column("user_id");
  const auto c_sid = csv.column("session_id");
  const auto c_t = csv.column("t_ms");
  const auto c_f = csv.column("feature_name");
  const auto c_v = csv.column("value");
  std::vector<SparseFeatureRow> rows;
  while (csv.next()) {
    rows.push_back({trim(csv.field(c_user)), trim(csv.field(c_sid)),
                    csv.integer(c_t), trim(csv.field(c_f)), csv.number(c_v)});
  }
  return rows;
}

FeatureMatrix to_dense(std::span<const SparseFeatureRow> rows,
                       const std::vector<std::string>& columns) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < columns.size(); ++i) index.emplace(columns[i], i);
  FeatureMatrixBuilder b(columns);
  std::vector<double> row(columns.size(), kInvalid);
  for (const auto& r : rows) {
    const auto it = index.find(r.feature);
    if (it == index.end()) continue;
    row[it->second] = r.value;
    b.add(r.user_id, r.session_id, r.t_ms, row);
    row[it->second] = kInvalid;
  }
  return std::move(b).build();
}

}  // namespace hmog
