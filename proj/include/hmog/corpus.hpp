#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hmog/csv.hpp"

namespace hmog {

/// Milliseconds since session start.
using Millis = std::int64_t;

enum class SensorKind : std::uint8_t { accelerometer, gyroscope, magnetometer };

inline constexpr std::array<SensorKind, 3> kSensorKinds = {
    SensorKind::accelerometer, SensorKind::gyroscope, SensorKind::magnetometer};

/// Short tag used in files and feature names: acc, gyr, mag.
std::string_view sensor_tag(SensorKind kind);
std::optional<SensorKind> parse_sensor_tag(std::string_view tag);

enum class Condition : std::uint8_t { sitting, walking };

std::string_view condition_name(Condition c);
std::optional<Condition> parse_condition(std::string_view name);

struct SensorReading {
  Millis t = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

template <typename Scalar>
Scalar magnitude(Scalar x, Scalar y, Scalar z) {
  using std::sqrt;
  return sqrt(x * x + y * y + z * z);
}

inline double magnitude(const SensorReading& r) {
  return magnitude(r.x, r.y, r.z);
}

struct SensorStream {
  SensorKind sensor = SensorKind::accelerometer;
  double nominal_rate_hz = 100.0;
  std::vector<SensorReading> readings;

  friend bool operator==(const SensorStream&, const SensorStream&) = default;
};

struct TouchSample {
  Millis t = 0;
  double x_px = 0.0;
  double y_px = 0.0;
  double contact_size = 0.0;

  friend bool operator==(const TouchSample&, const TouchSample&) = default;
};

struct TapEvent {
  Millis t_start = 0;
  Millis t_end = 0;
  std::vector<TouchSample> samples;

  friend bool operator==(const TapEvent&, const TapEvent&) = default;
};

struct KeyEvent {
  std::string key_code;
  Millis t_press = 0;
  Millis t_release = 0;

  friend bool operator==(const KeyEvent&, const KeyEvent&) = default;
};

/// The 35 keys used for digraphs: 26 letters, 5 keyboard switches and
/// 4 special characters.
const std::array<std::string, 35>& canonical_keys();
bool is_canonical_key(std::string_view key);
/// Index into canonical_keys(), if present.
std::optional<std::size_t> canonical_key_index(std::string_view key);

struct Session {
  std::string user_id;
  std::string session_id;
  Condition condition = Condition::sitting;
  std::array<SensorStream, 3> streams{
      SensorStream{SensorKind::accelerometer, 100.0, {}},
      SensorStream{SensorKind::gyroscope, 100.0, {}},
      SensorStream{SensorKind::magnetometer, 100.0, {}}};
  std::vector<TapEvent> taps;
  std::vector<KeyEvent> keys;

  const SensorStream& stream(SensorKind kind) const {
    return streams[static_cast<std::size_t>(kind)];
  }
  SensorStream& stream(SensorKind kind) {
    return streams[static_cast<std::size_t>(kind)];
  }

  friend bool operator==(const Session&, const Session&) = default;
};

/// Throws a data error naming the first violated invariant.
void validate(const SensorStream& stream);
void validate(const Session& session);

/// Readings with from_ms <= t <= to_ms, as a contiguous view into the stream.
std::span<const SensorReading> window(const SensorStream& stream,
                                      Millis from_ms, Millis to_ms);

/// Keeps readings at indices 0, k, 2k, ...
SensorStream downsample(const SensorStream& stream, std::size_t factor);
Session downsample(const Session& session, std::size_t factor);

// --- Canonical CSV files -------------------------------------------------

struct SessionMeta {
  std::string user_id;
  std::string session_id;
  Condition condition = Condition::sitting;
  double rate_hz = 100.0;
};

struct SessionSources {
  std::istream* sensors = nullptr;
  std::istream* touch = nullptr;
  std::istream* keys = nullptr;
  /// Optional explicit tap boundaries.
  std::istream* taps = nullptr;
};

/// Parses every session listed in `metas` from multi-session CSV streams.
/// Rows whose session_id is not listed are ignored.
std::vector<Session> parse_sessions(const SessionSources& sources,
                                    std::span<const SessionMeta> metas,
                                    const ColumnMapping& mapping = {});

Session parse_session(const SessionSources& sources, const SessionMeta& meta,
                      const ColumnMapping& mapping = {});

void write_sensor_csv(std::ostream& out, std::span<const Session> sessions);
void write_touch_csv(std::ostream& out, std::span<const Session> sessions);
void write_taps_csv(std::ostream& out, std::span<const Session> sessions);
void write_key_csv(std::ostream& out, std::span<const Session> sessions);

/// A corpus directory holds sessions.csv (`user_id,session_id,condition`
/// with optional `rate_hz`) plus sensors.csv, touch.csv, keys.csv and an
/// optional taps.csv.
std::vector<Session> load_corpus(const std::string& dir,
                                 const ColumnMapping& mapping = {});
void write_corpus(const std::string& dir, std::span<const Session> sessions,
                  const std::string& banner = {});

// --- Synthetic sessions ----------------------------------------------------

struct SensorProfile {
  Eigen::Vector3d baseline = Eigen::Vector3d::Zero();
  /// Peak of the tap impulse per axis.
  Eigen::Vector3d tap_amplitude = Eigen::Vector3d::Zero();
  /// Amplitude of the sinusoidal gait component per axis (walking only).
  Eigen::Vector3d gait_amplitude = Eigen::Vector3d::Zero();
  double noise_sd = 0.02;
  /// Per-session random shift of the baseline (holding posture drift).
  double session_drift_sd = 0.0;
};

struct SynthProfile {
  std::string user_id = "u0";
  std::array<SensorProfile, 3> sensors{};
  double tap_decay_ms = 50.0;
  /// Relative per-tap jitter of the impulse amplitude.
  double tap_amplitude_jitter = 0.15;
  double tap_rate_hz = 3.0;
  double tap_duration_ms = 90.0;
  double tap_duration_sd = 12.0;
  double min_gap_ms = 60.0;
  /// Chance that a tap is followed by a longer pause (reading, thinking).
  double pause_probability = 0.1;
  double pause_mean_ms = 1200.0;
  double contact_mean = 0.30;
  double contact_sd = 0.03;
  Eigen::Vector2d touch_offset_px = Eigen::Vector2d::Zero();
  /// Spread of the per-key hold-time offsets drawn for this user.
  double key_hold_spread_ms = 12.0;
  /// Spread of the per-key reach delays added to inter-press intervals.
  double key_reach_spread_ms = 40.0;
  double gait_frequency_hz = 1.8;
  /// Noise multiplier applied while walking.
  double walking_noise_scale = 2.0;
  double session_seconds = 180.0;
  double rate_hz = 100.0;
  int sessions_per_condition = 4;
  std::vector<Condition> conditions{Condition::sitting, Condition::walking};
};

/// Throws a config error for non-positive rates or durations.
void validate(const SynthProfile& profile);

/// Deterministic for a fixed (profile, seed). Sessions are ordered by
/// condition, then session index; ids are `<user>_<condition>_<index>`, index from 1.
std::vector<Session> synthesize_user(const SynthProfile& profile,
                                     std::uint64_t seed);

/// A population of distinct users with separable micro-movement signatures.
std::vector<SynthProfile> standard_profiles(std::size_t users,
                                            std::uint64_t seed);

}  // namespace hmog
