#include "hmog/touchkeys.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hmog {

double quantile_sorted(std::span<const double> sorted, double q) {
  const double h = double(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

const std::vector<std::string>& tap_feature_names() {
  static const std::vector<std::string> names = {
      "tap_duration",   "contact_mean",  "contact_median", "contact_stdev",
      "contact_q1",     "contact_q2",    "contact_q3",     "contact_first",
      "contact_min",    "contact_max",   "tap_velocity"};
  return names;
}

TapFeatureResult tap_features(const Session& session) {
  TapFeatureResult result;
  FeatureMatrixBuilder builder(tap_feature_names());
  std::vector<double> row(kTapFeatureCount);
  const TapEvent* previous = nullptr;
  for (const auto& tap : session.taps) {
    if (tap.samples.empty() || tap.t_end <= tap.t_start) {
      ++result.skipped;
      continue;
    }
    std::vector<double> contact;
    for (const auto& s : tap.samples) contact.push_back(s.contact_size);
    const double first = contact.front();
    std::sort(contact.begin(), contact.end());
    double mean = 0.0;
    for (double c : contact) mean += c;
    mean /= double(contact.size());
    double var = 0.0;
    for (double c : contact) var += (c - mean) * (c - mean);
    var /= double(contact.size());

    row[0] = double(tap.t_end - tap.t_start);
    row[1] = mean;
    row[2] = quantile_sorted(contact, 0.5);
    row[3] = std::sqrt(var);
    row[4] = quantile_sorted(contact, 0.25);
    row[5] = row[2];
    row[6] = quantile_sorted(contact, 0.75);
    row[7] = first;
    row[8] = contact.front();
    row[9] = contact.back();
    row[10] = kInvalid;
    if (previous) {
      const double dt_s = double(tap.t_start - previous->t_start) / 1000.0;
      if (dt_s > 0.0) {
        const auto& a = previous->samples.front();
        const auto& b = tap.samples.front();
        row[10] = std::hypot(b.x_px - a.x_px, b.y_px - a.y_px) / dt_s;
      }
    }
    builder.add(session.user_id, session.session_id, tap.t_start, row);
    previous = &tap;
  }
  result.matrix = std::move(builder).build();
  return result;
}

KeyUniverse::KeyUniverse()
    : keys_(canonical_keys().begin(), canonical_keys().end()) {}

KeyUniverse::KeyUniverse(std::vector<std::string> extended) : KeyUniverse() {
  for (auto& k : extended) {
    if (!contains(k)) keys_.push_back(std::move(k));
  }
}

bool KeyUniverse::contains(std::string_view key) const {
  return std::find(keys_.begin(), keys_.end(), key) != keys_.end();
}

std::vector<std::string> key_hold_feature_names(const KeyUniverse& universe) {
  std::vector<std::string> names;
  for (const auto& k : universe.keys()) names.push_back("hold_" + k);
  return names;
}

const std::vector<std::string>& digraph_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& a : canonical_keys()) {
      for (const auto& b : canonical_keys()) out.push_back("dg_" + a + "_" + b);
    }
    return out;
  }();
  return names;
}

KeystrokeFeatures keystroke_features(const Session& session,
                                     const KeyUniverse& universe) {
  KeystrokeFeatures out;
  const KeyEvent* previous = nullptr;
  for (const auto& key : session.keys) {
    if (universe.contains(key.key_code) && key.t_release > key.t_press) {
      out.holds.push_back({session.user_id, session.session_id, key.t_press,
                           "hold_" + key.key_code,
                           double(key.t_release - key.t_press)});
    }
    if (previous && is_canonical_key(previous->key_code) &&
        is_canonical_key(key.key_code) && key.t_press > previous->t_press) {
      out.digraphs.push_back({session.user_id, session.session_id, key.t_press,
                              "dg_" + previous->key_code + "_" + key.key_code,
                              double(key.t_press - previous->t_press)});
    }
    previous = &key;
  }
  return out;
}

std::vector<SparseFeatureRow> latency_outlier_filter(
    std::span<const SparseFeatureRow> rows, double l_ms, std::size_t m_min) {
  std::vector<SparseFeatureRow> kept;
  for (const auto& r : rows) {
    if (!(r.value > l_ms)) kept.push_back(r);
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& r : kept) ++counts[r.feature];
  std::erase_if(kept, [&](const SparseFeatureRow& r) { return counts[r.feature] < m_min; });
  return kept;
}

}  // namespace hmog
