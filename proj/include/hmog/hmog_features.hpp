#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmog/corpus.hpp"
#include "hmog/features.hpp"

namespace hmog {

/// Reading component a feature is computed on; `magnitude` is M = |(x,y,z)|.
enum class Channel : std::uint8_t { x, y, z, magnitude };

inline constexpr std::array<Channel, 4> kChannels = {Channel::x, Channel::y,
                                                     Channel::z, Channel::magnitude};

std::string_view channel_tag(Channel c);
double channel_value(const SensorReading& r, Channel c);

struct ChannelSample {
  Millis t = 0;
  double v = 0.0;
};

std::vector<ChannelSample> channel_series(std::span<const SensorReading> readings,
                                          Channel c);

/// Readings of one channel split around a tap (or pseudo-tap) [t_start, t_end].
///   before   : [t_start - 100, t_start)
///   during   : [t_start, t_end]
///   after100 : (t_end, t_end + 100]
///   after200 : (t_end, t_end + 200]
/// Averages and maxima are NaN when their window is empty.
struct TapWindow {
  Millis t_start = 0;
  Millis t_end = 0;
  std::vector<ChannelSample> before;
  std::vector<ChannelSample> during;
  std::vector<ChannelSample> after100;
  std::vector<ChannelSample> after200;

  double avg100ms_before = kInvalid;
  double avg100ms_after = kInvalid;
  double avg_tap = kInvalid;
  double max_tap = kInvalid;
  Millis t_max_in_tap = 0;
  Millis t_before_center = 0;
  Millis t_after_center = 0;
};

/// `series` must be sorted by time; only the samples inside the tap's
/// context are used.
TapWindow make_tap_window(std::span<const ChannelSample> series, Millis t_start,
                          Millis t_end);

/// (mean during, stdev during, after - before, avgTap - before, maxTap - before).
/// Empty when the before, during or after100 window is empty.
std::optional<std::array<double, 5>> resistance_features(const TapWindow& w);

/// Time at which the post-tap readings settle closest to the pre-tap level:
/// the start of the suffix of `after` with the smallest mean absolute
/// deviation from `avg_before`. Ties go to the earliest reading.
std::optional<Millis> t_min(std::span<const ChannelSample> after, double avg_before);

/// (t_min - t_end, duration normalised by before/after change, time from the
/// in-tap maximum normalised by its change). Entries are NaN when the
/// corresponding denominator is zero; all NaN when a required window is empty.
std::array<double, 3> stability_features(const TapWindow& w);

inline constexpr std::size_t kResistanceCount = 5;
inline constexpr std::size_t kStabilityCount = 3;
inline constexpr std::size_t kHmogFeatureCount =
    (kResistanceCount + kStabilityCount) * 3 * 4;

/// `<sensor>_<channel>_<family><index>`: the 60 resistance features
/// (sensor-major, then channel, then index) followed by the 36 stability ones.
const std::vector<std::string>& hmog_feature_names();

enum class ExtractMode : std::uint8_t { during, between };

struct BetweenTapParams {
  Millis block_ms = 91;
  Millis guard_ms = 300;
};

/// Pseudo-taps covering the guarded gaps between consecutive taps.
std::vector<std::pair<Millis, Millis>> between_tap_blocks(
    std::span<const TapEvent> taps, const BetweenTapParams& params = {});

struct HmogExtraction {
  FeatureMatrix matrix;
  /// Taps (or blocks) without a single valid feature.
  std::size_t skipped = 0;
  /// Emitted taps whose context window overlaps the previous tap's.
  std::size_t overlapping = 0;
};

HmogExtraction extract_hmog(const Session& session, ExtractMode mode,
                            const BetweenTapParams& params = {});

}  // namespace hmog
