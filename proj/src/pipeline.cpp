#include "hmog/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "json.hpp"

namespace hmog {

// --- Feature selection -----------------------------------------------------

namespace {

// Row indices per user, in first-appearance order.
std::vector<std::vector<Eigen::Index>> rows_by_user(const FeatureMatrix& x) {
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<Eigen::Index>> groups;
  for (std::size_t r = 0; r < x.user_ids.size(); ++r) {
    auto [it, fresh] = slot.emplace(x.user_ids[r], groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(Eigen::Index(r));
  }
  return groups;
}

}  // namespace

Eigen::VectorXd fisher_scores(const FeatureMatrix& x) {
  const auto groups = rows_by_user(x);
  if (groups.size() < 2) {
    throw data_error("fisher score needs at least two users");
  }
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    std::vector<double> means;
    std::vector<double> vars;
    for (const auto& rows : groups) {
      double sum = 0.0;
      std::size_t n = 0;
      for (auto r : rows) {
        if (is_valid(x.values(r, c))) {
          sum += x.values(r, c);
          ++n;
        }
      }
      if (n == 0) continue;
      const double mu = sum / double(n);
      double ss = 0.0;
      for (auto r : rows) {
        const double v = x.values(r, c);
        if (is_valid(v)) ss += (v - mu) * (v - mu);
      }
      means.push_back(mu);
      vars.push_back(ss / double(n));
    }
    if (means.size() < 2) continue;
    const double grand =
        std::accumulate(means.begin(), means.end(), 0.0) / double(means.size());
    double between = 0.0;
    for (double m : means) between += (m - grand) * (m - grand);
    between /= double(means.size());
    const double within =
        std::accumulate(vars.begin(), vars.end(), 0.0) / double(vars.size());
    scores[c] = between / std::max(within, kSigmaFloor * kSigmaFloor);
  }
  return scores;
}

std::vector<Eigen::Index> select_by_fisher(const Eigen::VectorXd& scores,
                                           double fraction) {
  if (!(fraction > 0.0)) {
    throw std::invalid_argument("select_by_fisher: fraction must be in (0, 1]");
  }
  std::vector<Eigen::Index> order(std::size_t(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scores[a] > scores[b];
  });
  if (fraction >= 1.0) return order;
  const double total = scores.sum();
  const double target = fraction * total * (1.0 - 1e-12);
  double running = 0.0;
  std::size_t k = 0;
  while (k < order.size() && running < target) running += scores[order[k++]];
  order.resize(k);
  return order;
}

std::vector<int> discretize_equal_frequency(const Eigen::Ref<const Eigen::VectorXd>& column,
                                            int bins) {
  std::vector<double> valid;
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    if (is_valid(column[i])) valid.push_back(column[i]);
  }
  std::sort(valid.begin(), valid.end());
  std::vector<double> cuts;
  for (int k = 1; k < bins && !valid.empty(); ++k) {
    cuts.push_back(valid[std::size_t(k) * valid.size() / std::size_t(bins)]);
  }
  std::vector<int> out(std::size_t(column.size()));
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    const double v = column[i];
    out[std::size_t(i)] =
        is_valid(v) ? int(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin())
                    : bins;
  }
  return out;
}

double mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("mutual_information: size mismatch");
  if (a.empty()) return 0.0;
  const auto range = [](std::span<const int> s) {
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    if (*lo < 0) throw std::invalid_argument("mutual_information: negative label");
    return std::size_t(*hi) + 1;
  };
  const std::size_t na = range(a);
  const std::size_t nb = range(b);
  std::vector<double> joint(na * nb, 0.0);
  std::vector<double> pa(na, 0.0);
  std::vector<double> pb(nb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[std::size_t(a[i]) * nb + std::size_t(b[i])] += 1.0;
    pa[std::size_t(a[i])] += 1.0;
    pb[std::size_t(b[i])] += 1.0;
  }
  const double n = double(a.size());
  double mi = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double c = joint[i * nb + j];
      if (c > 0.0) mi += (c / n) * std::log2(c * n / (pa[i] * pb[j]));
    }
  }
  return std::max(mi, 0.0);
}

std::vector<Eigen::Index> mrmr_select(const FeatureMatrix& x, double threshold, int bins) {
  std::map<std::string, int> codes;
  std::vector<int> labels;
  for (const auto& u : x.user_ids) {
    labels.push_back(codes.emplace(u, int(codes.size())).first->second);
  }
  const auto d = std::size_t(x.cols());
  std::vector<std::vector<int>> disc(d);
  std::vector<double> relevance(d);
  for (std::size_t f = 0; f < d; ++f) {
    disc[f] = discretize_equal_frequency(x.values.col(Eigen::Index(f)), bins);
    relevance[f] = mutual_information(disc[f], labels);
  }
  std::vector<Eigen::Index> selected;
  std::vector<double> redundancy_sum(d, 0.0);
  std::vector<bool> taken(d, false);
  while (selected.size() < d) {
    std::optional<std::size_t> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < d; ++f) {
      if (taken[f]) continue;
      const double score =
          relevance[f] -
          (selected.empty() ? 0.0 : redundancy_sum[f] / double(selected.size()));
      if (score > best_score) {
        best_score = score;
        best = f;
      }
    }
    if (!best || best_score <= threshold) break;
    taken[*best] = true;
    selected.push_back(Eigen::Index(*best));
    for (std::size_t f = 0; f < d; ++f) {
      if (!taken[f]) redundancy_sum[f] += mutual_information(disc[f], disc[*best]);
    }
  }
  return selected;
}

// --- PCA -------------------------------------------------------------------------

PcaBasis pca_fit(const Eigen::Ref<const Eigen::MatrixXd>& x, double variance_fraction) {
  if (x.rows() < 2) throw data_error("pca: need at least two vectors");
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0)) {
    throw std::invalid_argument("pca: variance fraction must be in (0, 1]");
  }
  PcaBasis basis;
  basis.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centred = x.rowwise() - basis.mean.transpose();
  const Eigen::MatrixXd cov =
      (centred.transpose() * centred) / double(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw data_error("pca: eigen-decomposition failed");

  const Eigen::Index d = cov.rows();
  Eigen::VectorXd values = solver.eigenvalues().reverse().cwiseMax(0.0);
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  const double total = values.sum();
  if (!(total > 0.0) || values[0] <= 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    throw data_error("pca: degenerate covariance");
  }
  Eigen::Index k = 0;
  double cumulative = 0.0;
  const double target = variance_fraction * total * (1.0 - 1e-12);
  while (k < d && cumulative < target) cumulative += values[k++];

  basis.components = vectors.leftCols(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::Index pivot = 0;
    basis.components.col(j).cwiseAbs().maxCoeff(&pivot);
    if (basis.components(pivot, j) < 0.0) basis.components.col(j) *= -1.0;
  }
  basis.variances = values.head(k);
  basis.variance_fraction = basis.variances / total;
  return basis;
}

Eigen::VectorXd pca_transform(const PcaBasis& basis,
                              const Eigen::Ref<const Eigen::VectorXd>& v) {
  return basis.components.transpose() * (v - basis.mean);
}

Eigen::VectorXd pca_reconstruct(const PcaBasis& basis,
                                const Eigen::Ref<const Eigen::VectorXd>& components) {
  return basis.mean + basis.components * components;
}

// --- Templates ---------------------------------------------------------------

void validate(const PipelineParams& p) {
  if (p.selector == Selector::fisher &&
      !(p.fisher_fraction >= 0.80 && p.fisher_fraction <= 1.0)) {
    throw config_error("fisher fraction must be in [0.80, 1.00]");
  }
  if (p.pca_fraction) {
    const double f = *p.pca_fraction;
    const bool allowed = f == 0.90 || f == 0.95 || f == 0.98 || f == 1.00;
    if (!allowed) throw config_error("pca fraction must be one of 0.90, 0.95, 0.98, 1.00");
  }
  if (!(p.scan_seconds > 0.0)) throw config_error("scan length must be positive");
  if (!(p.l_ms > 0.0)) throw config_error("latency limit l must be positive");
}

std::string describe(const PipelineParams& p) {
  std::ostringstream out;
  switch (p.selector) {
    case Selector::none: out << "all"; break;
    case Selector::fisher: out << "fisher" << p.fisher_fraction; break;
    case Selector::mrmr: out << "mrmr" << p.mrmr_threshold; break;
  }
  if (p.pca_fraction) out << "+pca" << *p.pca_fraction;
  return out.str();
}

std::vector<Eigen::Index> select_features(const FeatureMatrix& training,
                                          const PipelineParams& params) {
  switch (params.selector) {
    case Selector::fisher:
      return select_by_fisher(fisher_scores(training), params.fisher_fraction);
    case Selector::mrmr:
      return mrmr_select(training, params.mrmr_threshold);
    case Selector::none:
      break;
  }
  std::vector<Eigen::Index> all(std::size_t(training.cols()));
  std::iota(all.begin(), all.end(), Eigen::Index(0));
  return all;
}

std::vector<Eigen::Index> Template::resolve(
    const std::vector<std::string>& source_columns) const {
  std::unordered_map<std::string_view, Eigen::Index> position;
  for (std::size_t c = 0; c < source_columns.size(); ++c) {
    position.emplace(source_columns[c], Eigen::Index(c));
  }
  std::vector<Eigen::Index> idx;
  idx.reserve(features.size());
  for (const auto& f : features) {
    const auto it = position.find(f);
    idx.push_back(it == position.end() ? Eigen::Index(-1) : it->second);
  }
  return idx;
}

Eigen::VectorXd Template::project(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                  std::span<const Eigen::Index> source_index) const {
  Eigen::VectorXd v(mean.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Eigen::Index k = source_index[std::size_t(i)];
    const double x = k < 0 ? kInvalid : row[k];
    v[i] = is_valid(x) ? x : mean[i];
  }
  if (!pca) return v;
  const Eigen::VectorXd z = (v - mean).cwiseQuotient(stdev);
  return pca_transform(*pca, z);
}

Template build_template(const FeatureMatrix& training,
                        std::span<const Eigen::Index> selected,
                        const PipelineParams& params, std::size_t min_vectors) {
  const std::string user = training.user_ids.empty() ? "" : training.user_ids.front();
  FeatureMatrix sub = training.select_columns(selected);
  if (std::isfinite(params.l_ms) || params.m_min > 0) {
    sub = latency_filter(sub, params.l_ms, params.m_min);
  }
  if (std::size_t(sub.rows()) < min_vectors) {
    throw EnrollmentFailure(user, "user " + user + ": " + std::to_string(sub.rows()) +
                                      " training vectors, need " +
                                      std::to_string(min_vectors));
  }
  auto [mean, stdev] = nan_mean_stdev(sub.values);

  Template t;
  t.user_id = user;
  t.params = params;
  t.count = std::size_t(sub.rows());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    if (is_valid(mean[i])) keep.push_back(i);
  }
  if (keep.empty()) {
    throw EnrollmentFailure(user, "user " + user + ": no valid training features");
  }
  t.mean.resize(Eigen::Index(keep.size()));
  t.stdev.resize(Eigen::Index(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    t.features.push_back(sub.columns[std::size_t(keep[i])]);
    t.mean[Eigen::Index(i)] = mean[keep[i]];
    t.stdev[Eigen::Index(i)] = std::max(stdev[keep[i]], kSigmaFloor);
  }

  if (!params.pca_fraction) {
    t.score_mean = t.mean;
    t.score_stdev = t.stdev;
    return t;
  }
  // Standardised, mean-imputed training vectors.
  Eigen::MatrixXd z(sub.rows(), Eigen::Index(keep.size()));
  for (Eigen::Index r = 0; r < sub.rows(); ++r) {
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const double x = sub.values(r, keep[i]);
      const auto c = Eigen::Index(i);
      z(r, c) = is_valid(x) ? (x - t.mean[c]) / t.stdev[c] : 0.0;
    }
  }
  try {
    t.pca = pca_fit(z, *params.pca_fraction);
  } catch (const Error& e) {
    throw EnrollmentFailure(user, "user " + user + ": " + e.what());
  }
  const Eigen::MatrixXd projected =
      (z.rowwise() - t.pca->mean.transpose()) * t.pca->components;
  auto [pm, ps] = nan_mean_stdev(projected);
  t.score_mean = pm;
  t.score_stdev = ps.cwiseMax(kSigmaFloor);
  return t;
}

// --- Serialisation ---------------------------------------------------------

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), Eigen::Index(values.size()));
}

json params_to_json(const PipelineParams& p) {
  json j;
  j["selector"] = p.selector == Selector::fisher ? "fisher"
                  : p.selector == Selector::mrmr ? "mrmr"
                                                 : "none";
  j["fisher_fraction"] = p.fisher_fraction;
  j["mrmr_threshold"] = p.mrmr_threshold;
  j["pca_fraction"] = p.pca_fraction ? json(*p.pca_fraction) : json(nullptr);
  j["scan_seconds"] = p.scan_seconds;
  j["l_ms"] = std::isinf(p.l_ms) ? json(nullptr) : json(p.l_ms);
  j["m_min"] = p.m_min;
  return j;
}

PipelineParams params_from_json(const json& j) {
  PipelineParams p;
  const auto sel = j.at("selector").get<std::string>();
  p.selector = sel == "fisher" ? Selector::fisher
               : sel == "mrmr" ? Selector::mrmr
                               : Selector::none;
  p.fisher_fraction = j.at("fisher_fraction").get<double>();
  p.mrmr_threshold = j.at("mrmr_threshold").get<double>();
  if (!j.at("pca_fraction").is_null()) p.pca_fraction = j.at("pca_fraction").get<double>();
  p.scan_seconds = j.at("scan_seconds").get<double>();
  if (!j.at("l_ms").is_null()) p.l_ms = j.at("l_ms").get<double>();
  p.m_min = j.at("m_min").get<std::size_t>();
  return p;
}

}  // namespace

void write_templates(std::ostream& out, std::span<const Template> templates) {
  json doc;
  doc["format"] = "hmog-templates";
  doc["version"] = 1;
  doc["templates"] = json::array();
  for (const auto& t : templates) {
    json j;
    j["user_id"] = t.user_id;
    j["features"] = t.features;
    j["mean"] = vec_to_json(t.mean);
    j["stdev"] = vec_to_json(t.stdev);
    j["score_mean"] = vec_to_json(t.score_mean);
    j["score_stdev"] = vec_to_json(t.score_stdev);
    j["count"] = t.count;
    j["params"] = params_to_json(t.params);
    if (t.pca) {
      json p;
      p["mean"] = vec_to_json(t.pca->mean);
      p["rows"] = t.pca->components.rows();
      p["cols"] = t.pca->components.cols();
      const RowMatrix rm = t.pca->components;
      p["components"] = std::vector<double>(rm.data(), rm.data() + rm.size());
      p["variances"] = vec_to_json(t.pca->variances);
      p["variance_fraction"] = vec_to_json(t.pca->variance_fraction);
      j["pca"] = p;
    } else {
      j["pca"] = nullptr;
    }
    doc["templates"].push_back(j);
  }
  out << doc.dump(1) << '\n';
}

std::vector<Template> read_templates(std::istream& in) {
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw data_error(std::string("template file: ") + e.what());
  }
  if (doc.value("format", "") != "hmog-templates" || doc.value("version", 0) != 1) {
    throw data_error("template file: unsupported format or version");
  }
  std::vector<Template> out;
  try {
    for (const auto& j : doc.at("templates")) {
      Template t;
      t.user_id = j.at("user_id").get<std::string>();
      t.features = j.at("features").get<std::vector<std::string>>();
      t.mean = vec_from_json(j.at("mean"));
      t.stdev = vec_from_json(j.at("stdev"));
      t.score_mean = vec_from_json(j.at("score_mean"));
      t.score_stdev = vec_from_json(j.at("score_stdev"));
      t.count = j.at("count").get<std::size_t>();
      t.params = params_from_json(j.at("params"));
      if (!j.at("pca").is_null()) {
        const auto& p = j.at("pca");
        PcaBasis b;
        b.mean = vec_from_json(p.at("mean"));
        const auto rows = p.at("rows").get<Eigen::Index>();
        const auto cols = p.at("cols").get<Eigen::Index>();
        const auto data = p.at("components").get<std::vector<double>>();
        if (Eigen::Index(data.size()) != rows * cols) {
          throw data_error("template file: PCA matrix size mismatch");
        }
        b.components = Eigen::Map<const RowMatrix>(data.data(), rows, cols);
        b.variances = vec_from_json(p.at("variances"));
        b.variance_fraction = vec_from_json(p.at("variance_fraction"));
        t.pca = std::move(b);
      }
      out.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw data_error(std::string("template file: ") + e.what());
  }
  return out;
}

// --- Authentication vectors -----------------------------------------------------

FeatureMatrix scan_aggregate(const FeatureMatrix& vectors, double seconds,
                             std::optional<Millis> origin) {
  if (!(seconds > 0.0)) throw std::invalid_argument("scan_aggregate: seconds must be positive");
  const double span_ms = seconds * 1000.0;

  // Group rows by (user, session), preserving first appearance.
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  std::vector<std::vector<Eigen::Index>> groups;
  for (std::size_t r = 0; r < vectors.t_ms.size(); ++r) {
    auto [it, fresh] =
        slot.emplace(std::pair(vectors.user_ids[r], vectors.session_ids[r]), groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(Eigen::Index(r));
  }

  FeatureMatrixBuilder out(vectors.columns);
  const auto d = std::size_t(vectors.cols());
  for (const auto& rows : groups) {
    Millis start = origin.value_or(std::numeric_limits<Millis>::max());
    if (!origin) {
      for (auto r : rows) start = std::min(start, vectors.t_ms[std::size_t(r)]);
    }
    std::map<long long, std::vector<Eigen::Index>> windows;
    for (auto r : rows) {
      const auto k = static_cast<long long>(
          std::floor(double(vectors.t_ms[std::size_t(r)] - start) / span_ms));
      windows[k].push_back(r);
    }
    for (const auto& [k, members] : windows) {
      std::vector<double> sum(d, 0.0);
      std::vector<std::size_t> n(d, 0);
      for (auto r : members) {
        for (std::size_t c = 0; c < d; ++c) {
          const double v = vectors.values(r, Eigen::Index(c));
          if (is_valid(v)) {
            sum[c] += v;
            ++n[c];
          }
        }
      }
      for (std::size_t c = 0; c < d; ++c) sum[c] = n[c] ? sum[c] / double(n[c]) : kInvalid;
      const auto first = std::size_t(members.front());
      out.add(vectors.user_ids[first], vectors.session_ids[first],
              start + static_cast<Millis>(std::llround(double(k) * span_ms)), sum);
    }
  }
  return std::move(out).build();
}

FeatureMatrix latency_filter(const FeatureMatrix& x, double l_ms, std::size_t m_min) {
  FeatureMatrix out = x;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    std::size_t n = 0;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      double& v = out.values(r, c);
      if (is_valid(v) && v > l_ms) v = kInvalid;
      if (is_valid(v)) ++n;
    }
    if (n < m_min) out.values.col(c).setConstant(kInvalid);
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    if (out.values.row(r).unaryExpr([](double v) { return is_valid(v) ? 1.0 : 0.0; }).sum() > 0) {
      keep.push_back(r);
    }
  }
  return keep.size() == std::size_t(out.rows()) ? out : out.select_rows(keep);
}

FeatureMatrix iqr_trim(const FeatureMatrix& x, double k) {
  FeatureMatrix out = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    std::vector<double> valid;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (is_valid(x.values(r, c))) valid.push_back(x.values(r, c));
    }
    if (valid.size() < 2) continue;
    std::sort(valid.begin(), valid.end());
    auto q = [&](double p) {
      const double h = double(valid.size() - 1) * p;
      const auto lo = std::size_t(std::floor(h));
      const auto hi = std::min(lo + 1, valid.size() - 1);
      return valid[lo] + (h - double(lo)) * (valid[hi] - valid[lo]);
    };
    const double q1 = q(0.25);
    const double q3 = q(0.75);
    const double lo = q1 - k * (q3 - q1);
    const double hi = q3 + k * (q3 - q1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double v = out.values(r, c);
      if (is_valid(v) && (v < lo || v > hi)) out.values(r, c) = kInvalid;
    }
  }
  return out;
}

}  // namespace hmog
