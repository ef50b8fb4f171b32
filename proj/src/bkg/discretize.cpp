#include "hmog/bkg/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "hmog/error.hpp"
#include "hmog/pipeline.hpp"

namespace hmog::bkg {

Symbol ds(double x, double min, double max, Symbol d_range) {
  if (x < min) return 0;
  if (x > max) return d_range;
  const auto v = static_cast<Symbol>(std::floor(double(d_range) * ((x - min) / (max - min))));
  return std::clamp<Symbol>(v, 0, d_range);
}

std::vector<Symbol> assign_d_range(std::span<const double> sigma, Symbol p) {
  std::vector<Symbol> out(sigma.size(), p - 1);
  if (sigma.empty()) return out;
  const auto [lo, hi] = std::minmax_element(sigma.begin(), sigma.end());
  if (!(*hi > *lo)) return out;
  const double half = double(p - 1) / 2.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    out[i] = (p - 1) - static_cast<Symbol>(std::lround(half * (sigma[i] - *lo) / (*hi - *lo)));
  }
  return out;
}

double percentile(std::span<const double> values, double q) {
  std::vector<double> v;
  for (double x : values) {
    if (is_valid(x)) v.push_back(x);
  }
  if (v.empty()) return kInvalid;
  std::sort(v.begin(), v.end());
  const double h = double(v.size() - 1) * q;
  const auto lo = std::size_t(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

DiscretizationSpec fit_discretization(const FeatureMatrix& training, Symbol p,
                                      const DiscretizationOptions& options) {
  if (training.rows() == 0) throw data_error("discretization: no training vectors");
  DiscretizationSpec spec;
  spec.p = p;
  const auto d = std::size_t(training.cols());
  std::vector<double> spread(d, 0.0);

  std::map<std::string, std::vector<Eigen::Index>> by_user;
  for (std::size_t r = 0; r < training.user_ids.size(); ++r) {
    by_user[training.user_ids[r]].push_back(Eigen::Index(r));
  }

  for (std::size_t c = 0; c < d; ++c) {
    const auto col = training.values.col(Eigen::Index(c));
    std::vector<double> values(std::size_t(col.size()));
    for (Eigen::Index r = 0; r < col.size(); ++r) values[std::size_t(r)] = col[r];
    double lo = percentile(values, options.lower_percentile);
    double hi = percentile(values, options.upper_percentile);
    if (!is_valid(lo)) {
      throw data_error("discretization: feature '" + training.columns[c] +
                       "' has no valid training values");
    }
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    }
    spec.min.push_back(lo);
    spec.max.push_back(hi);

    double sum = 0.0;
    double n = 0.0;
    for (const auto& [user, rows] : by_user) {
      Eigen::VectorXd v(Eigen::Index(rows.size()));
      for (std::size_t k = 0; k < rows.size(); ++k) v[Eigen::Index(k)] = col[rows[k]];
      const auto [mu, sd] = nan_mean_stdev(v);
      if (is_valid(sd[0])) {
        sum += sd[0];
        n += 1.0;
      }
    }
    spread[c] = n > 0.0 ? sum / n / (hi - lo) : 0.0;

    double total = 0.0;
    double count = 0.0;
    for (double x : values) {
      if (is_valid(x)) {
        total += x;
        count += 1.0;
      }
    }
    spec.fill.push_back(total / count);
  }
  spec.d_range = assign_d_range(spread, p);
  return spec;
}

Word discretize(const DiscretizationSpec& spec, std::span<const double> row) {
  if (row.size() != spec.size()) {
    throw std::invalid_argument("discretize: row has " + std::to_string(row.size()) +
                                " values, spec has " + std::to_string(spec.size()));
  }
  Word out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double x = is_valid(row[i]) ? row[i] : spec.fill[i];
    out[i] = ds(x, spec.min[i], spec.max[i], spec.d_range[i]);
  }
  return out;
}

}  // namespace hmog::bkg
