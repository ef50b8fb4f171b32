#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hmog/corpus.hpp"
#include "hmog/features.hpp"

namespace hmog {

/// Linear interpolation between order statistics: h = (n - 1) q.
/// `sorted` must be ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double q);

/// duration, nine contact-size statistics, velocity between consecutive presses.
const std::vector<std::string>& tap_feature_names();
inline constexpr std::size_t kTapFeatureCount = 11;

struct TapFeatureResult {
  FeatureMatrix matrix;
  std::size_t skipped = 0;
};

/// One row per tap, stamped with the tap's start. The first tap's velocity is
/// invalid, as is any velocity across a zero press interval.
TapFeatureResult tap_features(const Session& session);

/// Keys that get a key-hold feature. Always contains the 35 canonical keys;
/// further keys can be added by configuration. Anything else is "other" and
/// is excluded.
class KeyUniverse {
 public:
  KeyUniverse();
  explicit KeyUniverse(std::vector<std::string> extended);

  bool contains(std::string_view key) const;
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

/// `hold_<key>` for every key in the universe.
std::vector<std::string> key_hold_feature_names(const KeyUniverse& universe);
/// `dg_<first>_<second>` over the canonical alphabet: 35 x 35 names.
const std::vector<std::string>& digraph_feature_names();
inline constexpr std::size_t kDigraphFeatureCount = 35 * 35;

struct KeystrokeFeatures {
  std::vector<SparseFeatureRow> holds;
  std::vector<SparseFeatureRow> digraphs;
};

/// Key-hold latency per key event (stamped at the press) and down-down
/// latency per consecutive press pair inside the canonical alphabet (stamped
/// at the second press).
KeystrokeFeatures keystroke_features(const Session& session,
                                     const KeyUniverse& universe = {});

/// Drops latencies longer than `l_ms`, then features observed fewer than
/// `m_min` times in what remains.
std::vector<SparseFeatureRow> latency_outlier_filter(
    std::span<const SparseFeatureRow> rows,
    double l_ms = std::numeric_limits<double>::infinity(), std::size_t m_min = 0);

}  // namespace hmog
