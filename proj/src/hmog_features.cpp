#include "hmog/hmog_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hmog {

std::string_view channel_tag(Channel c) {
  switch (c) {
    case Channel::x: return "x";
    case Channel::y: return "y";
    case Channel::z: return "z";
    case Channel::magnitude: return "M";
  }
  return "?";
}

double channel_value(const SensorReading& r, Channel c) {
  switch (c) {
    case Channel::x: return r.x;
    case Channel::y: return r.y;
    case Channel::z: return r.z;
    case Channel::magnitude: return magnitude(r);
  }
  return kInvalid;
}

std::vector<ChannelSample> channel_series(std::span<const SensorReading> readings,
                                          Channel c) {
  std::vector<ChannelSample> out;
  out.reserve(readings.size());
  for (const auto& r : readings) out.push_back({r.t, channel_value(r, c)});
  return out;
}

namespace {

double mean(std::span<const ChannelSample> s) {
  double sum = 0.0;
  for (const auto& x : s) sum += x.v;
  return sum / double(s.size());
}

// Population standard deviation.
double stdev(std::span<const ChannelSample> s, double mu) {
  double sum = 0.0;
  for (const auto& x : s) sum += (x.v - mu) * (x.v - mu);
  return std::sqrt(sum / double(s.size()));
}

}  // namespace

TapWindow make_tap_window(std::span<const ChannelSample> series, Millis t_start,
                          Millis t_end) {
  TapWindow w;
  w.t_start = t_start;
  w.t_end = t_end;
  w.t_before_center = t_start - 50;
  w.t_after_center = t_end + 50;
  for (const auto& s : series) {
    if (s.t >= t_start - 100 && s.t < t_start) {
      w.before.push_back(s);
    } else if (s.t >= t_start && s.t <= t_end) {
      w.during.push_back(s);
    } else if (s.t > t_end && s.t <= t_end + 200) {
      w.after200.push_back(s);
      if (s.t <= t_end + 100) w.after100.push_back(s);
    }
  }
  if (!w.before.empty()) w.avg100ms_before = mean(w.before);
  if (!w.after100.empty()) w.avg100ms_after = mean(w.after100);
  if (!w.during.empty()) {
    w.avg_tap = mean(w.during);
    const auto top = std::max_element(
        w.during.begin(), w.during.end(),
        [](const ChannelSample& a, const ChannelSample& b) { return a.v < b.v; });
    w.max_tap = top->v;
    w.t_max_in_tap = top->t;
  }
  return w;
}

std::optional<std::array<double, 5>> resistance_features(const TapWindow& w) {
  if (w.before.empty() || w.during.empty() || w.after100.empty()) {
    return std::nullopt;
  }
  return std::array<double, 5>{
      w.avg_tap,
      stdev(w.during, w.avg_tap),
      w.avg100ms_after - w.avg100ms_before,
      w.avg_tap - w.avg100ms_before,
      w.max_tap - w.avg100ms_before,
  };
}

std::optional<Millis> t_min(std::span<const ChannelSample> after, double avg_before) {
  if (after.empty()) return std::nullopt;
  const std::size_t n = after.size();
  // suffix[i] = sum_{j >= i} |Z_j - avg_before|
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    suffix[i] = suffix[i + 1] + std::abs(after[i].v - avg_before);
  }
  std::size_t best = 0;
  double best_avg = suffix[0] / double(n);
  for (std::size_t i = 1; i < n; ++i) {
    const double avg = suffix[i] / double(n - i);
    if (avg < best_avg) {
      best_avg = avg;
      best = i;
    }
  }
  return after[best].t;
}

std::array<double, 3> stability_features(const TapWindow& w) {
  std::array<double, 3> out{kInvalid, kInvalid, kInvalid};
  if (w.before.empty() || w.during.empty() || w.after100.empty() ||
      w.after200.empty()) {
    return out;
  }
  out[0] = double(*t_min(w.after200, w.avg100ms_before) - w.t_end);
  const double change = w.avg100ms_after - w.avg100ms_before;
  if (change != 0.0) {
    out[1] = double(w.t_after_center - w.t_before_center) / change;
  }
  const double settle = w.avg100ms_after - w.max_tap;
  if (settle != 0.0) {
    out[2] = double(w.t_after_center - w.t_max_in_tap) / settle;
  }
  return out;
}

const std::vector<std::string>& hmog_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    auto add_family = [&](const char* family, std::size_t count) {
      for (auto kind : kSensorKinds) {
        for (auto ch : kChannels) {
          for (std::size_t i = 1; i <= count; ++i) {
            out.push_back(std::string(sensor_tag(kind)) + "_" +
                          std::string(channel_tag(ch)) + "_" + family +
                          std::to_string(i));
          }
        }
      }
    };
    add_family("resistance", kResistanceCount);
    add_family("stability", kStabilityCount);
    return out;
  }();
  return names;
}

std::vector<std::pair<Millis, Millis>> between_tap_blocks(
    std::span<const TapEvent> taps, const BetweenTapParams& params) {
  std::vector<std::pair<Millis, Millis>> blocks;
  for (std::size_t i = 1; i < taps.size(); ++i) {
    const Millis begin = taps[i - 1].t_end + params.guard_ms;
    const Millis end = taps[i].t_start - params.guard_ms;
    for (Millis b = begin; b + params.block_ms <= end; b += params.block_ms) {
      blocks.emplace_back(b, b + params.block_ms - 1);
    }
  }
  return blocks;
}

namespace {

// Column offset of a feature in hmog_feature_names().
std::size_t resistance_column(std::size_t sensor, std::size_t channel, std::size_t i) {
  return (sensor * 4 + channel) * kResistanceCount + i;
}
std::size_t stability_column(std::size_t sensor, std::size_t channel, std::size_t i) {
  return 3 * 4 * kResistanceCount + (sensor * 4 + channel) * kStabilityCount + i;
}

}  // namespace

HmogExtraction extract_hmog(const Session& session, ExtractMode mode,
                            const BetweenTapParams& params) {
  std::vector<std::pair<Millis, Millis>> events;
  if (mode == ExtractMode::during) {
    for (const auto& tap : session.taps) events.emplace_back(tap.t_start, tap.t_end);
  } else {
    events = between_tap_blocks(session.taps, params);
  }

  HmogExtraction result;
  FeatureMatrixBuilder builder(hmog_feature_names());
  std::vector<double> row(kHmogFeatureCount);
  Millis previous_end = std::numeric_limits<Millis>::min() / 2;
  for (const auto& [t_start, t_end] : events) {
    std::fill(row.begin(), row.end(), kInvalid);
    bool any_valid = false;
    for (std::size_t s = 0; s < kSensorKinds.size(); ++s) {
      const auto readings =
          window(session.stream(kSensorKinds[s]), t_start - 100, t_end + 200);
      for (std::size_t c = 0; c < kChannels.size(); ++c) {
        const auto series = channel_series(readings, kChannels[c]);
        const TapWindow w = make_tap_window(series, t_start, t_end);
        if (const auto res = resistance_features(w)) {
          for (std::size_t i = 0; i < kResistanceCount; ++i) {
            row[resistance_column(s, c, i)] = (*res)[i];
          }
          any_valid = true;
        }
        const auto stab = stability_features(w);
        for (std::size_t i = 0; i < kStabilityCount; ++i) {
          row[stability_column(s, c, i)] = stab[i];
          any_valid = any_valid || is_valid(stab[i]);
        }
      }
    }
    if (!any_valid) {
      ++result.skipped;
    } else {
      if (t_start - previous_end < 300) ++result.overlapping;
      builder.add(session.user_id, session.session_id, t_start, row);
    }
    previous_end = t_end;
  }
  result.matrix = std::move(builder).build();
  return result;
}

}  // namespace hmog
