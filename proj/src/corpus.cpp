#include "hmog/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <unordered_map>

#include "hmog/error.hpp"

namespace hmog {

std::string_view sensor_tag(SensorKind kind) {
  switch (kind) {
    case SensorKind::accelerometer: return "acc";
    case SensorKind::gyroscope: return "gyr";
    case SensorKind::magnetometer: return "mag";
  }
  return "?";
}

std::optional<SensorKind> parse_sensor_tag(std::string_view tag) {
  for (auto kind : kSensorKinds) {
    if (sensor_tag(kind) == tag) return kind;
  }
  return std::nullopt;
}

std::string_view condition_name(Condition c) {
  return c == Condition::sitting ? "sitting" : "walking";
}

std::optional<Condition> parse_condition(std::string_view name) {
  if (name == "sitting") return Condition::sitting;
  if (name == "walking") return Condition::walking;
  return std::nullopt;
}

const std::array<std::string, 35>& canonical_keys() {
  static const std::array<std::string, 35> keys = {
      "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l",
      "m", "n", "o", "p", "q", "r", "s", "t", "u", "v", "w", "x",
      "y", "z", "shift", "switch", "delete", "done", "return", "space",
      "dot", "comma", "apostrophe"};
  return keys;
}

std::optional<std::size_t> canonical_key_index(std::string_view key) {
  const auto& keys = canonical_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i] == key) return i;
  }
  return std::nullopt;
}

bool is_canonical_key(std::string_view key) {
  return canonical_key_index(key).has_value();
}

void validate(const SensorStream& stream) {
  if (!(stream.nominal_rate_hz > 0.0)) {
    throw data_error("sensor stream: non-positive nominal rate");
  }
  for (std::size_t i = 0; i < stream.readings.size(); ++i) {
    if (stream.readings[i].t < 0) {
      throw data_error("sensor stream: negative timestamp");
    }
    if (i > 0 && stream.readings[i].t <= stream.readings[i - 1].t) {
      throw data_error("sensor stream " + std::string(sensor_tag(stream.sensor)) +
                       ": non-monotone timestamps at t=" +
                       std::to_string(stream.readings[i].t));
    }
  }
}

void validate(const Session& session) {
  for (const auto& s : session.streams) validate(s);
  for (std::size_t i = 0; i < session.taps.size(); ++i) {
    const auto& tap = session.taps[i];
    if (tap.t_start >= tap.t_end) throw data_error("tap with t_start >= t_end");
    if (tap.samples.empty()) throw data_error("tap with zero samples");
    for (const auto& s : tap.samples) {
      if (s.t < tap.t_start || s.t > tap.t_end) {
        throw data_error("touch sample outside its tap");
      }
      if (s.contact_size < 0.0) throw data_error("negative contact size");
    }
    if (i > 0 && tap.t_start <= session.taps[i - 1].t_end) {
      throw data_error("taps overlap or are out of order");
    }
  }
  for (std::size_t i = 0; i < session.keys.size(); ++i) {
    const auto& key = session.keys[i];
    if (key.t_press >= key.t_release) {
      throw data_error("key event with t_press >= t_release");
    }
    if (i > 0 && key.t_press < session.keys[i - 1].t_press) {
      throw data_error("key events: non-monotone timestamps");
    }
  }
}

std::span<const SensorReading> window(const SensorStream& stream,
                                      Millis from_ms, Millis to_ms) {
  if (from_ms > to_ms) {
    throw std::invalid_argument("window: from_ms > to_ms");
  }
  const auto& r = stream.readings;
  const auto lo = std::lower_bound(
      r.begin(), r.end(), from_ms,
      [](const SensorReading& a, Millis t) { return a.t < t; });
  const auto hi = std::upper_bound(
      lo, r.end(), to_ms,
      [](Millis t, const SensorReading& a) { return t < a.t; });
  return {lo, hi};
}

SensorStream downsample(const SensorStream& stream, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("downsample: factor must be >= 1");
  SensorStream out{stream.sensor, stream.nominal_rate_hz / double(factor), {}};
  out.readings.reserve(stream.readings.size() / factor + 1);
  for (std::size_t i = 0; i < stream.readings.size(); i += factor) {
    out.readings.push_back(stream.readings[i]);
  }
  return out;
}

Session downsample(const Session& session, std::size_t factor) {
  Session out = session;
  for (auto& s : out.streams) s = downsample(s, factor);
  return out;
}

// --- Parsing ----------------------------------------------------------------

namespace {

std::string lower(std::string_view s) {
  std::string out = trim(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return out;
}

struct TapAccumulator {
  std::optional<std::pair<Millis, Millis>> bounds;
  std::vector<TouchSample> samples;
};

}  // namespace

std::vector<Session> parse_sessions(const SessionSources& sources,
                                    std::span<const SessionMeta> metas,
                                    const ColumnMapping& mapping) {
  std::vector<Session> sessions(metas.size());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < metas.size(); ++i) {
    auto& s = sessions[i];
    s.user_id = metas[i].user_id;
    s.session_id = metas[i].session_id;
    s.condition = metas[i].condition;
    for (auto& st : s.streams) st.nominal_rate_hz = metas[i].rate_hz;
    if (!index.emplace(s.session_id, i).second) {
      throw config_error("duplicate session id " + s.session_id);
    }
  }
  auto lookup = [&](std::string_view id) -> Session* {
    const auto it = index.find(trim(id));
    return it == index.end() ? nullptr : &sessions[it->second];
  };

  if (sources.sensors) {
    CsvReader csv(*sources.sensors, "sensor csv", mapping);
    const auto c_sid = csv.column("session_id");
    const auto c_sensor = csv.column("sensor");
    const auto c_t = csv.column("t_ms");
    const auto c_x = csv.column("x");
    const auto c_y = csv.column("y");
    const auto c_z = csv.column("z");
    while (csv.next()) {
      Session* s = lookup(csv.field(c_sid));
      if (!s) continue;
      const auto kind = parse_sensor_tag(trim(csv.field(c_sensor)));
      if (!kind) csv.fail("unknown sensor tag '" + trim(csv.field(c_sensor)) + "'");
      SensorReading r{csv.millis(c_t), csv.number(c_x), csv.number(c_y),
                      csv.number(c_z)};
      if (r.t < 0) csv.fail("negative timestamp");
      auto& readings = s->stream(*kind).readings;
      if (!readings.empty() && r.t <= readings.back().t) {
        throw data_error("sensor csv line " + std::to_string(csv.line_number()) +
                         ": non-monotone timestamps");
      }
      readings.push_back(r);
    }
  }

  // Per session, taps keyed by tap id.
  std::vector<std::map<std::string, TapAccumulator>> taps(sessions.size());
  const bool explicit_bounds = sources.taps != nullptr;
  if (sources.taps) {
    CsvReader csv(*sources.taps, "taps csv", mapping);
    const auto c_sid = csv.column("session_id");
    const auto c_tap = csv.column("tap_id");
    const auto c_start = csv.column("t_start_ms");
    const auto c_end = csv.column("t_end_ms");
    while (csv.next()) {
      Session* s = lookup(csv.field(c_sid));
      if (!s) continue;
      const auto t0 = csv.millis(c_start);
      const auto t1 = csv.millis(c_end);
      if (t0 >= t1) csv.fail("tap with t_start >= t_end");
      auto& acc = taps[std::size_t(s - sessions.data())][trim(csv.field(c_tap))];
      if (acc.bounds) csv.fail("duplicate tap id");
      acc.bounds = {t0, t1};
    }
  }
  if (sources.touch) {
    CsvReader csv(*sources.touch, "touch csv", mapping);
    const auto c_sid = csv.column("session_id");
    const auto c_tap = csv.column("tap_id");
    const auto c_t = csv.column("t_ms");
    const auto c_x = csv.column("x_px");
    const auto c_y = csv.column("y_px");
    const auto c_c = csv.column("contact_size");
    while (csv.next()) {
      Session* s = lookup(csv.field(c_sid));
      if (!s) continue;
      auto& session_taps = taps[std::size_t(s - sessions.data())];
      const std::string tap_id = trim(csv.field(c_tap));
      auto it = session_taps.find(tap_id);
      if (it == session_taps.end()) {
        if (explicit_bounds) csv.fail("tap id '" + tap_id + "' not in taps csv");
        it = session_taps.emplace(tap_id, TapAccumulator{}).first;
      }
      TouchSample sample{csv.millis(c_t), csv.number(c_x), csv.number(c_y),
                         csv.number(c_c)};
      if (sample.contact_size < 0.0) csv.fail("negative contact size");
      auto& samples = it->second.samples;
      if (!samples.empty() && sample.t < samples.back().t) {
        throw data_error("touch csv line " + std::to_string(csv.line_number()) +
                         ": non-monotone timestamps");
      }
      samples.push_back(sample);
    }
  }
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    auto& out = sessions[i].taps;
    for (auto& [id, acc] : taps[i]) {
      if (acc.samples.empty()) {
        throw data_error("session " + sessions[i].session_id + ": tap " + id +
                         " with zero samples");
      }
      TapEvent tap;
      if (acc.bounds) {
        tap.t_start = acc.bounds->first;
        tap.t_end = acc.bounds->second;
        for (const auto& s : acc.samples) {
          if (s.t < tap.t_start || s.t > tap.t_end) {
            throw data_error("session " + sessions[i].session_id + ": tap " +
                             id + " has a sample outside its boundaries");
          }
        }
      } else {
        tap.t_start = acc.samples.front().t;
        tap.t_end = acc.samples.back().t;
        if (tap.t_start >= tap.t_end) {
          throw data_error("session " + sessions[i].session_id + ": tap " + id +
                           " has zero duration; supply taps.csv boundaries");
        }
      }
      tap.samples = std::move(acc.samples);
      out.push_back(std::move(tap));
    }
    std::sort(out.begin(), out.end(), [](const TapEvent& a, const TapEvent& b) {
      return a.t_start < b.t_start;
    });
    for (std::size_t k = 1; k < out.size(); ++k) {
      if (out[k].t_start <= out[k - 1].t_end) {
        throw data_error("session " + sessions[i].session_id +
                         ": overlapping taps at t=" + std::to_string(out[k].t_start));
      }
    }
  }

  if (sources.keys) {
    CsvReader csv(*sources.keys, "key csv", mapping);
    const auto c_sid = csv.column("session_id");
    const auto c_key = csv.column("key_code");
    const auto c_press = csv.column("t_press_ms");
    const auto c_release = csv.column("t_release_ms");
    while (csv.next()) {
      Session* s = lookup(csv.field(c_sid));
      if (!s) continue;
      KeyEvent key{lower(csv.field(c_key)), csv.millis(c_press),
                   csv.millis(c_release)};
      if (key.key_code.empty()) csv.fail("empty key code");
      if (key.t_press >= key.t_release) csv.fail("t_press >= t_release");
      if (!s->keys.empty() && key.t_press < s->keys.back().t_press) {
        throw data_error("key csv line " + std::to_string(csv.line_number()) +
                         ": non-monotone timestamps");
      }
      s->keys.push_back(std::move(key));
    }
  }
  return sessions;
}

Session parse_session(const SessionSources& sources, const SessionMeta& meta,
                      const ColumnMapping& mapping) {
  return std::move(parse_sessions(sources, std::span(&meta, 1), mapping).front());
}

void write_sensor_csv(std::ostream& out, std::span<const Session> sessions) {
  out << "session_id,sensor,t_ms,x,y,z\n";
  for (const auto& s : sessions) {
    for (const auto& st : s.streams) {
      for (const auto& r : st.readings) {
        out << s.session_id << ',' << sensor_tag(st.sensor) << ',' << r.t << ','
            << format_double(r.x) << ',' << format_double(r.y) << ','
            << format_double(r.z) << '\n';
      }
    }
  }
}

namespace {
std::string tap_id(std::size_t k) { return "t" + std::to_string(k); }
}  // namespace

void write_touch_csv(std::ostream& out, std::span<const Session> sessions) {
  out << "session_id,tap_id,t_ms,x_px,y_px,contact_size\n";
  for (const auto& s : sessions) {
    for (std::size_t k = 0; k < s.taps.size(); ++k) {
      for (const auto& p : s.taps[k].samples) {
        out << s.session_id << ',' << tap_id(k) << ',' << p.t << ','
            << format_double(p.x_px) << ',' << format_double(p.y_px) << ','
            << format_double(p.contact_size) << '\n';
      }
    }
  }
}

void write_taps_csv(std::ostream& out, std::span<const Session> sessions) {
  out << "session_id,tap_id,t_start_ms,t_end_ms\n";
  for (const auto& s : sessions) {
    for (std::size_t k = 0; k < s.taps.size(); ++k) {
      out << s.session_id << ',' << tap_id(k) << ',' << s.taps[k].t_start << ','
          << s.taps[k].t_end << '\n';
    }
  }
}

void write_key_csv(std::ostream& out, std::span<const Session> sessions) {
  out << "session_id,key_code,t_press_ms,t_release_ms\n";
  for (const auto& s : sessions) {
    for (const auto& k : s.keys) {
      out << s.session_id << ',' << k.key_code << ',' << k.t_press << ','
          << k.t_release << '\n';
    }
  }
}

std::vector<Session> load_corpus(const std::string& dir,
                                 const ColumnMapping& mapping) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::ifstream manifest(root / "sessions.csv");
  if (!manifest) throw data_error("cannot open " + (root / "sessions.csv").string());
  std::vector<SessionMeta> metas;
  {
    CsvReader csv(manifest, "sessions.csv");
    const auto c_user = csv.column("user_id");
    const auto c_sid = csv.column("session_id");
    const auto c_cond = csv.column("condition");
    const auto c_rate = csv.find_column("rate_hz");
    while (csv.next()) {
      SessionMeta meta;
      meta.user_id = trim(csv.field(c_user));
      meta.session_id = trim(csv.field(c_sid));
      const auto cond = parse_condition(trim(csv.field(c_cond)));
      if (!cond) csv.fail("unknown condition");
      meta.condition = *cond;
      if (c_rate) meta.rate_hz = csv.number(*c_rate);
      metas.push_back(std::move(meta));
    }
  }
  auto open = [&](const char* name, bool required) -> std::unique_ptr<std::ifstream> {
    const fs::path p = root / name;
    if (!fs::exists(p)) {
      if (required) throw data_error("missing " + p.string());
      return nullptr;
    }
    auto in = std::make_unique<std::ifstream>(p);
    if (!*in) throw data_error("cannot open " + p.string());
    return in;
  };
  auto sensors = open("sensors.csv", true);
  auto touch = open("touch.csv", false);
  auto keys = open("keys.csv", false);
  auto taps = open("taps.csv", false);
  SessionSources sources{sensors.get(), touch.get(), keys.get(), taps.get()};
  return parse_sessions(sources, metas, mapping);
}

void write_corpus(const std::string& dir, std::span<const Session> sessions,
                  const std::string& banner) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw data_error("cannot write " + (fs::path(dir) / name).string());
    if (!banner.empty()) out << "# " << banner << '\n';
    return out;
  };
  {
    auto out = open("sessions.csv");
    out << "user_id,session_id,condition,rate_hz\n";
    for (const auto& s : sessions) {
      out << s.user_id << ',' << s.session_id << ',' << condition_name(s.condition)
          << ',' << format_double(s.streams[0].nominal_rate_hz) << '\n';
    }
  }
  { auto out = open("sensors.csv"); write_sensor_csv(out, sessions); }
  { auto out = open("touch.csv"); write_touch_csv(out, sessions); }
  { auto out = open("taps.csv"); write_taps_csv(out, sessions); }
  { auto out = open("keys.csv"); write_key_csv(out, sessions); }
}

// --- Synthesis --------------------------------------------------------------

void validate(const SynthProfile& p) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw config_error(std::string("synth profile: ") + what);
  };
  require(p.rate_hz > 0.0, "rate_hz must be positive");
  require(p.session_seconds > 0.0, "session_seconds must be positive");
  require(p.tap_rate_hz >= 0.0, "tap_rate_hz must be non-negative");
  require(p.tap_duration_ms > 0.0, "tap_duration_ms must be positive");
  require(p.tap_decay_ms > 0.0, "tap_decay_ms must be positive");
  require(p.min_gap_ms > 0.0, "min_gap_ms must be positive");
  require(p.pause_probability >= 0.0 && p.pause_probability <= 1.0,
          "pause_probability must lie in [0, 1]");
  require(p.pause_mean_ms >= 0.0, "pause_mean_ms must be non-negative");
  require(p.gait_frequency_hz > 0.0, "gait_frequency_hz must be positive");
  require(p.sessions_per_condition > 0, "sessions_per_condition must be positive");
  require(p.contact_mean >= 0.0 && p.contact_sd >= 0.0, "contact size must be non-negative");
}

namespace {

struct KeySpec {
  std::string code;
  double weight;
  double x;
  double y;
};

/// Keyboard layout in pixels with rough English key frequencies.
const std::vector<KeySpec>& keyboard() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    const std::map<char, double> freq = {
        {'e', 12.7}, {'t', 9.1}, {'a', 8.2}, {'o', 7.5}, {'i', 7.0}, {'n', 6.7},
        {'s', 6.3},  {'h', 6.1}, {'r', 6.0}, {'d', 4.3}, {'l', 4.0}, {'c', 2.8},
        {'u', 2.8},  {'m', 2.4}, {'w', 2.4}, {'f', 2.2}, {'g', 2.0}, {'y', 2.0},
        {'p', 1.9},  {'b', 1.5}, {'v', 1.0}, {'k', 0.8}, {'j', 0.2}, {'x', 0.2},
        {'q', 0.1},  {'z', 0.1}};
    const std::array<std::string, 3> rows = {"qwertyuiop", "asdfghjkl", "zxcvbnm"};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        k.push_back({std::string(1, rows[r][c]), freq.at(rows[r][c]) * 0.8,
                     54.0 + 108.0 * double(c) + 54.0 * double(r), 1200.0 + 150.0 * double(r)});
      }
    }
    k.push_back({"space", 15.0, 540.0, 1650.0});
    k.push_back({"shift", 1.5, 60.0, 1500.0});
    k.push_back({"delete", 2.5, 1020.0, 1500.0});
    k.push_back({"dot", 1.2, 860.0, 1650.0});
    k.push_back({"comma", 1.0, 220.0, 1650.0});
    k.push_back({"apostrophe", 0.3, 960.0, 1650.0});
    k.push_back({"return", 0.4, 1020.0, 1650.0});
    k.push_back({"switch", 0.3, 60.0, 1650.0});
    k.push_back({"done", 0.1, 1020.0, 1800.0});
    k.push_back({"1", 0.15, 54.0, 1050.0});
    k.push_back({"2", 0.15, 162.0, 1050.0});
    return k;
  }();
  return keys;
}

}  // namespace

std::vector<Session> synthesize_user(const SynthProfile& profile,
                                     std::uint64_t seed) {
  validate(profile);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const auto& keys = keyboard();
  std::vector<double> weights;
  for (const auto& k : keys) weights.push_back(k.weight);
  std::discrete_distribution<std::size_t> pick_key(weights.begin(), weights.end());

  // User-level traits shared by all sessions.
  std::vector<double> hold_offset(keys.size());
  std::vector<double> reach_delay(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    hold_offset[i] = profile.key_hold_spread_ms * normal(rng);
    reach_delay[i] = profile.key_reach_spread_ms * std::abs(normal(rng));
  }
  std::array<Eigen::Vector3d, 3> gait_phase;
  for (auto& ph : gait_phase) {
    for (int a = 0; a < 3; ++a) ph[a] = 2.0 * std::numbers::pi * uniform(rng);
  }

  const double period_ms = 1000.0 / profile.rate_hz;
  const auto session_ms = static_cast<Millis>(profile.session_seconds * 1000.0);
  const double extra_gap_mean =
      profile.tap_rate_hz > 0.0
          ? std::max(1.0, 1000.0 / profile.tap_rate_hz - profile.tap_duration_ms -
                              profile.min_gap_ms)
          : 0.0;
  std::exponential_distribution<double> extra_gap(1.0 / std::max(extra_gap_mean, 1.0));
  std::exponential_distribution<double> pause(1.0 / std::max(profile.pause_mean_ms, 1.0));

  std::vector<Session> out;
  for (const Condition condition : profile.conditions) {
    for (int index = 1; index <= profile.sessions_per_condition; ++index) {
      Session s;
      s.user_id = profile.user_id;
      s.session_id = profile.user_id + "_" + std::string(condition_name(condition)) +
                     "_" + std::to_string(index);
      s.condition = condition;
      const bool walking = condition == Condition::walking;

      // Taps and their key events.
      std::vector<double> tap_gain;
      if (profile.tap_rate_hz > 0.0) {
        double t = 300.0 + 200.0 * uniform(rng);
        std::size_t key = pick_key(rng);
        while (true) {
          const double duration =
              std::max(30.0, profile.tap_duration_ms + hold_offset[key] +
                                 profile.tap_duration_sd * normal(rng));
          const auto t_start = static_cast<Millis>(t);
          const auto t_end = static_cast<Millis>(t + duration);
          if (double(t_end) + 300.0 > double(session_ms)) break;
          TapEvent tap{t_start, t_end, {}};
          const double contact = std::max(
              0.01, profile.contact_mean + profile.contact_sd * normal(rng));
          const double px = keys[key].x + profile.touch_offset_px[0] + 8.0 * normal(rng);
          const double py = keys[key].y + profile.touch_offset_px[1] + 8.0 * normal(rng);
          for (Millis ts = t_start;; ts += 16) {
            const Millis at = std::min(ts, t_end);
            const double grow = double(at - t_start) / std::max(1.0, duration);
            tap.samples.push_back(
                {at, px + 0.5 * normal(rng), py + 0.5 * normal(rng),
                 std::max(0.0, contact * (0.9 + 0.2 * grow) +
                                   0.005 * normal(rng))});
            if (at == t_end) break;
          }
          s.taps.push_back(std::move(tap));
          s.keys.push_back({keys[key].code, t_start, t_end});
          tap_gain.push_back(std::max(
              0.0, 1.0 + profile.tap_amplitude_jitter * normal(rng)));

          const std::size_t next = pick_key(rng);
          t = double(t_end) + profile.min_gap_ms + reach_delay[next] + extra_gap(rng);
          if (uniform(rng) < profile.pause_probability) t += pause(rng);
          key = next;
        }
      }

      // Sensor streams.
      const double session_phase = 2.0 * std::numbers::pi * uniform(rng);
      for (const SensorKind kind : kSensorKinds) {
        const auto& sp = profile.sensors[std::size_t(kind)];
        auto& stream = s.stream(kind);
        stream.nominal_rate_hz = profile.rate_hz;
        Eigen::Vector3d base = sp.baseline;
        for (int a = 0; a < 3; ++a) base[a] += sp.session_drift_sd * normal(rng);
        const double noise =
            sp.noise_sd * (walking ? profile.walking_noise_scale : 1.0);
        const double horizon = 10.0 * profile.tap_decay_ms;
        std::size_t first_tap = 0;
        for (std::size_t k = 0;; ++k) {
          const auto t = static_cast<Millis>(std::llround(double(k) * period_ms));
          if (t > session_ms) break;
          Eigen::Vector3d v = base;
          for (int a = 0; a < 3; ++a) v[a] += noise * normal(rng);
          if (walking) {
            const double w = 2.0 * std::numbers::pi * profile.gait_frequency_hz *
                             double(t) / 1000.0;
            for (int a = 0; a < 3; ++a) {
              v[a] += sp.gait_amplitude[a] *
                      std::sin(w + gait_phase[std::size_t(kind)][a] + session_phase);
            }
          }
          while (first_tap < s.taps.size() &&
                 double(t - s.taps[first_tap].t_start) > horizon) {
            ++first_tap;
          }
          for (std::size_t j = first_tap;
               j < s.taps.size() && s.taps[j].t_start <= t; ++j) {
            const double decay =
                std::exp(-double(t - s.taps[j].t_start) / profile.tap_decay_ms);
            v += (tap_gain[j] * decay) * sp.tap_amplitude;
          }
          stream.readings.push_back({t, v[0], v[1], v[2]});
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<SynthProfile> standard_profiles(std::size_t users,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  std::vector<SynthProfile> out;
  for (std::size_t i = 0; i < users; ++i) {
    SynthProfile p;
    p.user_id = "u" + std::to_string(i + 1);
    const double tilt = between(0.35, 1.05);
    auto& acc = p.sensors[0];
    acc.baseline = {0.4 * n(rng), 9.81 * std::sin(tilt), 9.81 * std::cos(tilt)};
    acc.tap_amplitude = {between(-0.3, 0.3), between(-0.6, 0.6), between(0.3, 1.5)};
    acc.gait_amplitude = {between(0.3, 1.5), between(0.5, 2.5), between(0.5, 2.0)};
    acc.noise_sd = between(0.03, 0.08);
    acc.session_drift_sd = 0.25;
    auto& gyr = p.sensors[1];
    gyr.baseline = {0.01 * n(rng), 0.01 * n(rng), 0.01 * n(rng)};
    gyr.tap_amplitude = {between(-0.15, 0.15), between(-0.15, 0.15), between(-0.08, 0.08)};
    gyr.gait_amplitude = {between(0.05, 0.4), between(0.05, 0.4), between(0.05, 0.3)};
    gyr.noise_sd = between(0.005, 0.015);
    gyr.session_drift_sd = 0.005;
    auto& mag = p.sensors[2];
    mag.baseline = {20.0 * n(rng), 20.0 * n(rng), -30.0 + 15.0 * n(rng)};
    mag.tap_amplitude = {between(-0.5, 0.5), between(-0.5, 0.5), between(-0.5, 0.5)};
    mag.gait_amplitude = {between(0.5, 3.0), between(0.5, 3.0), between(0.5, 3.0)};
    mag.noise_sd = 0.4;
    mag.session_drift_sd = 8.0;
    p.tap_decay_ms = between(25.0, 90.0);
    p.tap_rate_hz = between(2.2, 3.6);
    p.tap_duration_ms = between(70.0, 115.0);
    p.contact_mean = between(0.2, 0.45);
    p.contact_sd = between(0.02, 0.05);
    p.touch_offset_px = {15.0 * n(rng), 15.0 * n(rng)};
    p.gait_frequency_hz = between(1.5, 2.1);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace hmog
