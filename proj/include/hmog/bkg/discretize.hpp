#pragma once

#include <span>
#include <vector>

#include "hmog/bkg/field.hpp"
#include "hmog/features.hpp"

namespace hmog::bkg {

/// Per-feature scaling of real values onto {0, ..., d_range}.
struct DiscretizationSpec {
  Symbol p = 0;
  std::vector<double> min;
  std::vector<double> max;
  std::vector<Symbol> d_range;
  /// Value used for invalid (NaN) inputs, typically the pooled training mean.
  std::vector<double> fill;

  std::size_t size() const { return d_range.size(); }
};

/// 0 below min, d_range above max, else floor(d_range (x - min) / (max - min)).
Symbol ds(double x, double min, double max, Symbol d_range);

/// (p-1) - round(((p-1)/2) (s_i - s_min) / (s_max - s_min)); p-1 everywhere when
/// all spreads are equal.
std::vector<Symbol> assign_d_range(std::span<const double> sigma, Symbol p);

/// Percentile with linear interpolation over the valid values of `values`;
/// NaN if none are valid.
double percentile(std::span<const double> values, double q);

struct DiscretizationOptions {
  double lower_percentile = 0.01;
  double upper_percentile = 0.99;
};

/// Fits min/max as pooled percentiles of `training`, and the d_range from each
/// feature's mean within-user standard deviation relative to max - min.
/// A feature with max == min is widened by one unit on each side.
DiscretizationSpec fit_discretization(const FeatureMatrix& training, Symbol p,
                                      const DiscretizationOptions& options = {});

/// Applies ds feature-wise; invalid inputs take the spec's fill value.
Word discretize(const DiscretizationSpec& spec, std::span<const double> row);

}  // namespace hmog::bkg
