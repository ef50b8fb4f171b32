#include "hmog/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hmog/bkg/commitment.hpp"
#include "hmog/bkg/discretize.hpp"
#include "hmog/bkg/grs.hpp"
#include "hmog/bkg/guessing.hpp"
#include "hmog/csv.hpp"
#include "hmog/parallel.hpp"

namespace hmog {

using nlohmann::json;

std::string_view feature_set_name(FeatureSet s) {
  switch (s) {
    case FeatureSet::hmog: return "hmog";
    case FeatureSet::tap: return "tap";
    case FeatureSet::keyhold: return "keyhold";
    case FeatureSet::digraph: return "digraph";
  }
  return "?";
}

std::optional<FeatureSet> parse_feature_set(std::string_view name) {
  for (auto s : {FeatureSet::hmog, FeatureSet::tap, FeatureSet::keyhold, FeatureSet::digraph}) {
    if (feature_set_name(s) == name) return s;
  }
  return std::nullopt;
}

namespace {

bool is_keystroke(FeatureSet s) { return s == FeatureSet::keyhold || s == FeatureSet::digraph; }

FeatureMatrix drop_magnetometer(const FeatureMatrix& m) {
  std::vector<Eigen::Index> keep;
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    if (m.columns[c].rfind("mag_", 0) != 0) keep.push_back(Eigen::Index(c));
  }
  return m.select_columns(keep);
}

}  // namespace

FeatureMatrix extract_feature_set(std::span<const Session> sessions, FeatureSet set,
                                  const ExtractOptions& options,
                                  const std::vector<std::string>* columns) {
  if (!is_keystroke(set)) {
    std::vector<FeatureMatrix> parts(sessions.size());
    parallel_for(sessions.size(), [&](std::size_t i) {
      parts[i] = set == FeatureSet::hmog
                     ? extract_hmog(sessions[i], options.mode, options.between).matrix
                     : tap_features(sessions[i]).matrix;
    });
    FeatureMatrix all = parts.empty()
                            ? FeatureMatrix(set == FeatureSet::hmog ? hmog_feature_names()
                                                                    : tap_feature_names())
                            : concat_rows(parts);
    if (set == FeatureSet::hmog && !options.include_magnetometer) all = drop_magnetometer(all);
    return all;
  }

  std::vector<SparseFeatureRow> rows;
  for (const auto& s : sessions) {
    auto k = keystroke_features(s, options.keys);
    auto& part = set == FeatureSet::keyhold ? k.holds : k.digraphs;
    std::move(part.begin(), part.end(), std::back_inserter(rows));
  }
  if (columns != nullptr) return to_dense(rows, *columns);

  const auto all_names = set == FeatureSet::keyhold ? key_hold_feature_names(options.keys)
                                                    : digraph_feature_names();
  std::set<std::string> seen;
  for (const auto& r : rows) seen.insert(r.feature);
  std::vector<std::string> observed;
  for (const auto& name : all_names) {
    if (seen.count(name)) observed.push_back(name);
  }
  return to_dense(rows, observed);
}

SessionSplit split_sessions(std::span<const Session> sessions, Condition condition,
                            std::size_t train_sessions) {
  std::vector<std::string> users;
  std::map<std::string, std::vector<const Session*>> by_user;
  for (const auto& s : sessions) {
    if (s.condition != condition) continue;
    if (!by_user.count(s.user_id)) users.push_back(s.user_id);
    by_user[s.user_id].push_back(&s);
  }
  SessionSplit split;
  for (const auto& u : users) {
    const auto& list = by_user[u];
    if (list.size() <= train_sessions) continue;
    for (std::size_t k = 0; k < list.size(); ++k) {
      (k < train_sessions ? split.train : split.test).push_back(*list[k]);
    }
  }
  return split;
}

std::vector<PipelineParams> GridSpec::expand(bool keystroke) const {
  std::vector<PipelineParams> selectors;
  for (double f : fisher_fractions) {
    PipelineParams p;
    p.selector = Selector::fisher;
    p.fisher_fraction = f;
    selectors.push_back(p);
  }
  for (double t : mrmr_thresholds) {
    PipelineParams p;
    p.selector = Selector::mrmr;
    p.mrmr_threshold = t;
    selectors.push_back(p);
  }
  if (include_unselected || selectors.empty()) selectors.emplace_back();

  const std::vector<double> ls =
      keystroke ? l_ms : std::vector<double>{std::numeric_limits<double>::infinity()};
  const std::vector<std::size_t> ms = keystroke ? m_min : std::vector<std::size_t>{0};
  std::vector<PipelineParams> out;
  for (const auto& sel : selectors) {
    for (const auto& pca : pca_fractions) {
      for (double l : ls) {
        for (std::size_t m : ms) {
          PipelineParams p = sel;
          p.pca_fraction = pca;
          p.l_ms = l;
          p.m_min = m;
          out.push_back(p);
        }
      }
    }
  }
  return out;
}

// --- Configuration -------------------------------------------------------------

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw config_error(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw config_error(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

double limit_from_json(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json limit_to_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

PipelineParams params_from(const json& j) {
  check_keys(j, {"selector", "fisher_fraction", "mrmr_threshold", "pca_fraction"}, "params");
  PipelineParams p;
  const auto sel = j.value("selector", std::string("none"));
  if (sel == "fisher") {
    p.selector = Selector::fisher;
  } else if (sel == "mrmr") {
    p.selector = Selector::mrmr;
  } else if (sel != "none") {
    throw config_error("params: unknown selector '" + sel + "'");
  }
  p.fisher_fraction = j.value("fisher_fraction", 1.0);
  p.mrmr_threshold = j.value("mrmr_threshold", 0.0);
  if (j.contains("pca_fraction") && !j["pca_fraction"].is_null()) {
    p.pca_fraction = j["pca_fraction"].get<double>();
  }
  return p;
}

json params_json(const PipelineParams& p) {
  return {{"selector", p.selector == Selector::fisher ? "fisher"
                       : p.selector == Selector::mrmr ? "mrmr"
                                                      : "none"},
          {"fisher_fraction", p.fisher_fraction},
          {"mrmr_threshold", p.mrmr_threshold},
          {"pca_fraction", p.pca_fraction ? json(*p.pca_fraction) : json(nullptr)}};
}

std::vector<BkgSet> default_bkg_sets() {
  return {{"hmog", {{FeatureSet::hmog, 13}}},
          {"tap", {{FeatureSet::tap, 0}}},
          {"keyhold", {{FeatureSet::keyhold, 8}}},
          {"hmog+tap3", {{FeatureSet::hmog, 13}, {FeatureSet::tap, 3}}}};
}

}  // namespace

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
  check_keys(j,
             {"corpus", "mapping", "synth", "conditions", "feature_sets", "verifier",
              "scan_seconds", "train_sessions", "cross_validate", "cv_folds", "grid", "params",
              "keystroke", "min_vectors", "scan_origin_ms", "fusion", "downsample_factors",
              "between", "include_magnetometer", "write_scores", "bkg", "output_dir", "seed",
              "workers"},
             "config");
  try {
    if (j.contains("corpus")) c.corpus_dir = j["corpus"].get<std::string>();
    if (j.contains("mapping")) c.mapping_file = j["mapping"].get<std::string>();
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      check_keys(s, {"users", "seed", "session_seconds"}, "synth");
      c.synth_users = s.value("users", c.synth_users);
      c.synth_seed = s.value("seed", c.synth_seed);
      c.synth_session_seconds = s.value("session_seconds", c.synth_session_seconds);
    }
    if (j.contains("conditions")) {
      c.conditions.clear();
      for (const auto& v : j["conditions"]) {
        const auto cond = parse_condition(v.get<std::string>());
        if (!cond) throw config_error("unknown condition '" + v.get<std::string>() + "'");
        c.conditions.push_back(*cond);
      }
    }
    if (j.contains("feature_sets")) {
      c.feature_sets.clear();
      for (const auto& v : j["feature_sets"]) {
        const auto set = parse_feature_set(v.get<std::string>());
        if (!set) throw config_error("unknown feature set '" + v.get<std::string>() + "'");
        c.feature_sets.push_back(*set);
      }
    }
    if (j.contains("verifier")) {
      const auto v = parse_verifier(j["verifier"].get<std::string>());
      if (!v) throw config_error("unknown verifier '" + j["verifier"].get<std::string>() + "'");
      c.verifier = *v;
    }
    if (j.contains("scan_seconds")) c.scan_seconds = j["scan_seconds"].get<std::vector<double>>();
    if (j.contains("train_sessions")) c.train_sessions = j["train_sessions"].get<std::size_t>();
    if (j.contains("cross_validate")) c.cross_validate = j["cross_validate"].get<bool>();
    if (j.contains("cv_folds")) c.cv_folds = j["cv_folds"].get<std::size_t>();
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      check_keys(g, {"fisher", "mrmr", "unselected", "pca", "l_ms", "m_min"}, "grid");
      if (g.contains("fisher")) c.grid.fisher_fractions = g["fisher"].get<std::vector<double>>();
      if (g.contains("mrmr")) c.grid.mrmr_thresholds = g["mrmr"].get<std::vector<double>>();
      c.grid.include_unselected = g.value("unselected", c.grid.include_unselected);
      if (g.contains("pca")) {
        c.grid.pca_fractions.clear();
        for (const auto& v : g["pca"]) {
          c.grid.pca_fractions.push_back(v.is_null() ? std::nullopt
                                                     : std::optional<double>(v.get<double>()));
        }
      }
      if (g.contains("l_ms")) {
        c.grid.l_ms.clear();
        for (const auto& v : g["l_ms"]) c.grid.l_ms.push_back(limit_from_json(v));
      }
      if (g.contains("m_min")) c.grid.m_min = g["m_min"].get<std::vector<std::size_t>>();
    }
    if (j.contains("params")) c.params = params_from(j["params"]);
    if (j.contains("keystroke")) {
      const auto& k = j["keystroke"];
      check_keys(k, {"l_ms", "m_min", "extra_keys"}, "keystroke");
      if (k.contains("l_ms")) c.keystroke_l_ms = limit_from_json(k["l_ms"]);
      c.keystroke_m_min = k.value("m_min", c.keystroke_m_min);
      if (k.contains("extra_keys")) c.extra_keys = k["extra_keys"].get<std::vector<std::string>>();
    }
    if (j.contains("min_vectors")) c.min_vectors = j["min_vectors"].get<std::size_t>();
    if (j.contains("scan_origin_ms")) c.scan_origin = j["scan_origin_ms"].get<Millis>();
    if (j.contains("fusion")) {
      const auto& f = j["fusion"];
      check_keys(f, {"enabled", "weights", "step"}, "fusion");
      c.fuse = f.value("enabled", c.fuse);
      if (f.contains("weights")) c.fusion_weights = f["weights"].get<std::vector<double>>();
      c.fusion_step = f.value("step", c.fusion_step);
    }
    if (j.contains("downsample_factors")) {
      c.downsample_factors = j["downsample_factors"].get<std::vector<std::size_t>>();
    }
    if (j.contains("between")) {
      const auto& b = j["between"];
      check_keys(b, {"block_ms", "guard_ms"}, "between");
      c.between.block_ms = b.value("block_ms", c.between.block_ms);
      c.between.guard_ms = b.value("guard_ms", c.between.guard_ms);
    }
    if (j.contains("include_magnetometer")) {
      c.include_magnetometer = j["include_magnetometer"].get<bool>();
    }
    if (j.contains("write_scores")) c.write_scores = j["write_scores"].get<bool>();
    if (j.contains("bkg")) {
      const auto& b = j["bkg"];
      check_keys(b, {"sets", "p", "l", "scan_seconds", "password", "percentiles"}, "bkg");
      if (b.contains("sets")) {
        c.bkg.sets.clear();
        for (const auto& s : b["sets"]) {
          check_keys(s, {"name", "parts"}, "bkg set");
          BkgSet set;
          set.name = s.at("name").get<std::string>();
          for (const auto& part : s.at("parts")) {
            check_keys(part, {"features", "k"}, "bkg part");
            const auto fs = parse_feature_set(part.at("features").get<std::string>());
            if (!fs) throw config_error("bkg: unknown feature set in set '" + set.name + "'");
            set.parts.emplace_back(*fs, part.value("k", std::size_t(0)));
          }
          c.bkg.sets.push_back(std::move(set));
        }
      }
      if (b.contains("p") && !b["p"].is_null()) c.bkg.p = b["p"].get<bkg::Symbol>();
      if (b.contains("l") && !b["l"].is_null()) c.bkg.l = b["l"].get<std::size_t>();
      c.bkg.scan_seconds = b.value("scan_seconds", c.bkg.scan_seconds);
      c.bkg.password = b.value("password", c.bkg.password);
      if (b.contains("percentiles")) {
        const auto q = b["percentiles"].get<std::vector<double>>();
        if (q.size() != 2) throw config_error("bkg: percentiles must be [lower, upper]");
        c.bkg.lower_percentile = q[0];
        c.bkg.upper_percentile = q[1];
      }
    }
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }

  if (c.scan_seconds.empty()) throw config_error("config: scan_seconds is empty");
  for (double s : c.scan_seconds) {
    if (!(s > 0.0)) throw config_error("config: scan lengths must be positive");
  }
  if (c.feature_sets.empty()) throw config_error("config: no feature sets");
  if (c.conditions.empty()) throw config_error("config: no conditions");
  if (c.train_sessions == 0) throw config_error("config: train_sessions must be positive");
  for (auto f : c.downsample_factors) {
    if (f == 0) throw config_error("config: downsample factors must be positive");
  }
  if (!c.fusion_weights.empty() && c.fusion_weights.size() != c.feature_sets.size()) {
    throw config_error("config: need one fusion weight per feature set");
  }
  for (double w : c.fusion_weights) {
    if (!(w >= 0.0)) throw config_error("config: fusion weights must be nonnegative");
  }
  if (c.cv_folds < 2) throw config_error("config: cv_folds must be at least 2");
  if (!(c.bkg.scan_seconds > 0.0)) throw config_error("config: bkg scan length must be positive");
  validate(c.params);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["corpus"] = c.corpus_dir;
  j["mapping"] = c.mapping_file;
  j["synth"] = {{"users", c.synth_users},
                {"seed", c.synth_seed},
                {"session_seconds", c.synth_session_seconds}};
  j["conditions"] = json::array();
  for (auto cond : c.conditions) j["conditions"].push_back(std::string(condition_name(cond)));
  j["feature_sets"] = json::array();
  for (auto s : c.feature_sets) j["feature_sets"].push_back(std::string(feature_set_name(s)));
  j["verifier"] = std::string(verifier_name(c.verifier));
  j["scan_seconds"] = c.scan_seconds;
  j["train_sessions"] = c.train_sessions;
  j["cross_validate"] = c.cross_validate;
  j["cv_folds"] = c.cv_folds;
  json pca = json::array();
  for (const auto& p : c.grid.pca_fractions) pca.push_back(p ? json(*p) : json(nullptr));
  json ls = json::array();
  for (double l : c.grid.l_ms) ls.push_back(limit_to_json(l));
  j["grid"] = {{"fisher", c.grid.fisher_fractions},
               {"mrmr", c.grid.mrmr_thresholds},
               {"unselected", c.grid.include_unselected},
               {"pca", pca},
               {"l_ms", ls},
               {"m_min", c.grid.m_min}};
  j["params"] = params_json(c.params);
  j["keystroke"] = {{"l_ms", limit_to_json(c.keystroke_l_ms)},
                    {"m_min", c.keystroke_m_min},
                    {"extra_keys", c.extra_keys}};
  j["min_vectors"] = c.min_vectors;
  j["scan_origin_ms"] = c.scan_origin;
  j["fusion"] = {{"enabled", c.fuse}, {"weights", c.fusion_weights}, {"step", c.fusion_step}};
  j["downsample_factors"] = c.downsample_factors;
  j["between"] = {{"block_ms", c.between.block_ms}, {"guard_ms", c.between.guard_ms}};
  j["include_magnetometer"] = c.include_magnetometer;
  j["write_scores"] = c.write_scores;
  json sets = json::array();
  for (const auto& s : c.bkg.sets) {
    json parts = json::array();
    for (const auto& [fs, k] : s.parts) {
      parts.push_back({{"features", std::string(feature_set_name(fs))}, {"k", k}});
    }
    sets.push_back({{"name", s.name}, {"parts", parts}});
  }
  j["bkg"] = {{"sets", sets},
              {"p", c.bkg.p ? json(*c.bkg.p) : json(nullptr)},
              {"l", c.bkg.l ? json(*c.bkg.l) : json(nullptr)},
              {"scan_seconds", c.bkg.scan_seconds},
              {"password", c.bkg.password},
              {"percentiles", {c.bkg.lower_percentile, c.bkg.upper_percentile}}};
  // Output location and worker count do not change results.
  j["seed"] = c.seed;
  return j;
}

std::string sha256_hex(std::string_view data) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  return bkg::to_hex(digest);
}

std::string config_hash(const ExperimentConfig& c) { return sha256_hex(config_to_json(c).dump()); }

std::string output_banner(const ExperimentConfig& c) {
  return "# config_sha256=" + config_hash(c) + " seed=" + std::to_string(c.seed);
}

std::vector<Session> load_sessions(const ExperimentConfig& c) {
  if (!c.corpus_dir.empty()) {
    const ColumnMapping mapping =
        c.mapping_file.empty() ? ColumnMapping() : ColumnMapping::load(c.mapping_file);
    return load_corpus(c.corpus_dir, mapping);
  }
  auto profiles = standard_profiles(c.synth_users, c.synth_seed);
  std::vector<std::vector<Session>> per_user(profiles.size());
  parallel_for(profiles.size(), [&](std::size_t i) {
    profiles[i].session_seconds = c.synth_session_seconds;
    per_user[i] = synthesize_user(profiles[i], c.synth_seed * 1000003ULL + i);
  });
  std::vector<Session> out;
  for (auto& v : per_user) std::move(v.begin(), v.end(), std::back_inserter(out));
  return out;
}

// --- Authentication ------------------------------------------------------------

namespace {

ExtractOptions extract_options(const ExperimentConfig& c, ExtractMode mode) {
  ExtractOptions o;
  o.mode = mode;
  o.between = c.between;
  o.include_magnetometer = c.include_magnetometer;
  o.keys = KeyUniverse(c.extra_keys);
  return o;
}

struct SetData {
  FeatureMatrix train;
  FeatureMatrix test;
};

SetData prepare(const SessionSplit& split, FeatureSet set, const ExtractOptions& options) {
  SetData d;
  d.train = extract_feature_set(split.train, set, options);
  d.test = extract_feature_set(split.test, set, options, &d.train.columns);
  return d;
}

FeatureMatrix limit_latency(const FeatureMatrix& m, double l_ms) {
  return std::isfinite(l_ms) ? latency_filter(m, l_ms, 0) : m;
}

std::vector<std::string> users_in_order(const FeatureMatrix& m) {
  std::vector<std::string> users;
  std::set<std::string> seen;
  for (const auto& u : m.user_ids) {
    if (seen.insert(u).second) users.push_back(u);
  }
  return users;
}

struct Evaluation {
  std::vector<AuthRow> rows;
  std::vector<EnrollmentRecord> failures;
  /// Per scan length; empty sets where infeasible.
  std::vector<ScoreSet> scores;
};

Evaluation evaluate_set(const ExperimentConfig& c, Condition condition, const std::string& name,
                        const SetData& data, const PipelineParams& params) {
  Evaluation ev;
  ev.scores.resize(c.scan_seconds.size());
  std::vector<Template> templates;
  std::vector<Eigen::Index> selected;
  bool feasible = data.train.rows() > 0;
  if (feasible) {
    try {
      selected = select_features(limit_latency(data.train, params.l_ms), params);
    } catch (const Error& e) {
      feasible = false;
    }
    feasible = feasible && !selected.empty();
  }
  const auto users = users_in_order(data.train);
  if (feasible) {
    std::vector<std::optional<Template>> built(users.size());
    std::vector<std::string> reasons(users.size());
    parallel_for(users.size(), [&](std::size_t i) {
      try {
        built[i] = build_template(data.train.rows_of_user(users[i]), selected, params,
                                  c.min_vectors);
      } catch (const EnrollmentFailure& e) {
        reasons[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < users.size(); ++i) {
      if (built[i]) {
        templates.push_back(std::move(*built[i]));
      } else {
        ev.failures.push_back({condition, name, users[i], reasons[i]});
      }
    }
  } else {
    for (const auto& u : users) {
      ev.failures.push_back({condition, name, u, "no usable features"});
    }
  }

  const FeatureMatrix probe = limit_latency(data.test, params.l_ms);
  for (std::size_t s = 0; s < c.scan_seconds.size(); ++s) {
    AuthRow row;
    row.condition = condition;
    row.feature_set = name;
    row.scan_seconds = c.scan_seconds[s];
    row.enrolled = templates.size();
    row.params = describe(params);
    if (templates.size() >= 2) {
      const auto auth = scan_aggregate(probe, c.scan_seconds[s], c.scan_origin);
      ev.scores[s] = gen_scores(templates, auth, c.verifier);
    }
    const auto& sc = ev.scores[s];
    row.genuine = sc.genuine.size();
    row.impostor = sc.impostor.size();
    if (sc.genuine.empty() || sc.impostor.empty()) {
      row.infeasible = true;
      row.eer = 0.5;
    } else {
      const auto g = sc.genuine_scores();
      const auto i = sc.impostor_scores();
      row.eer = eer(g, i);
      row.det = det_curve(g, i);
      if (c.write_scores) row.scores = sc;
    }
    ev.rows.push_back(std::move(row));
  }
  return ev;
}

PipelineParams choose_params(const ExperimentConfig& c, FeatureSet set, const FeatureMatrix& train) {
  const bool keystroke = is_keystroke(set);
  if (!c.cross_validate) {
    PipelineParams p = c.params;
    if (keystroke) {
      p.l_ms = c.keystroke_l_ms;
      p.m_min = c.keystroke_m_min;
    }
    return p;
  }
  const auto grid = c.grid.expand(keystroke);
  CvOptions options;
  options.folds = c.cv_folds;
  options.verifier = c.verifier;
  options.scan_origin = c.scan_origin;
  return cross_validate(train, grid, c.scan_seconds, options).params;
}

SessionSplit checked_split(const ExperimentConfig& c, std::span<const Session> sessions,
                           Condition condition) {
  auto split = split_sessions(sessions, condition, c.train_sessions);
  if (split.train.empty() || split.test.empty()) {
    throw data_error("no " + std::string(condition_name(condition)) +
                     " sessions with both training and test data");
  }
  return split;
}

void require_feasible(const AuthResults& r) {
  if (std::all_of(r.rows.begin(), r.rows.end(), [](const AuthRow& row) { return row.infeasible; })) {
    throw infeasible_error("no feature set enrolled two or more users");
  }
}

}  // namespace

AuthResults run_auth(const ExperimentConfig& c, std::span<const Session> sessions) {
  AuthResults out;
  for (auto condition : c.conditions) {
    const auto split = checked_split(c, sessions, condition);
    const auto options = extract_options(c, ExtractMode::during);
    std::vector<std::vector<ScoreSet>> set_scores;
    std::vector<std::string> names;
    for (auto set : c.feature_sets) {
      const auto data = prepare(split, set, options);
      const auto params = choose_params(c, set, data.train);
      auto ev = evaluate_set(c, condition, std::string(feature_set_name(set)), data, params);
      std::move(ev.rows.begin(), ev.rows.end(), std::back_inserter(out.rows));
      std::move(ev.failures.begin(), ev.failures.end(), std::back_inserter(out.failures));
      set_scores.push_back(std::move(ev.scores));
      names.emplace_back(feature_set_name(set));
    }
    if (!c.fuse || c.feature_sets.size() < 2) continue;

    for (std::size_t s = 0; s < c.scan_seconds.size(); ++s) {
      std::vector<std::string> channels;
      std::vector<ScoreSet> sets;
      std::vector<double> weights;
      for (std::size_t k = 0; k < names.size(); ++k) {
        const auto& sc = set_scores[k][s];
        if (sc.genuine.empty() || sc.impostor.empty()) continue;
        channels.push_back(names[k]);
        sets.push_back(sc);
        if (!c.fusion_weights.empty()) weights.push_back(c.fusion_weights[k]);
      }
      AuthRow row;
      row.condition = condition;
      row.feature_set = "fused";
      row.scan_seconds = c.scan_seconds[s];
      std::vector<double> full(names.size(), 0.0);
      if (!sets.empty()) {
        const auto table = align_scores(channels, sets);
        if (weights.empty()) weights = search_fusion_weights(table, c.fusion_step).weights;
        const auto fused = fuse_table(table, weights);
        if (!fused.genuine.empty() && !fused.impostor.empty()) {
          const auto g = fused.genuine_scores();
          const auto i = fused.impostor_scores();
          row.eer = eer(g, i);
          row.det = det_curve(g, i);
          row.genuine = g.size();
          row.impostor = i.size();
          if (c.write_scores) row.scores = fused;
        } else {
          row.infeasible = true;
        }
        std::size_t w = 0;
        for (std::size_t k = 0; k < names.size(); ++k) {
          if (w < channels.size() && channels[w] == names[k]) full[k] = weights[w++];
        }
      } else {
        row.infeasible = true;
      }
      std::ostringstream desc;
      for (std::size_t k = 0; k < names.size(); ++k) {
        desc << (k ? ";" : "") << names[k] << '=' << format_double(full[k]);
      }
      row.params = desc.str();
      out.fusion_weights.push_back(full);
      out.rows.push_back(std::move(row));
    }
  }
  require_feasible(out);
  return out;
}

AuthResults run_between_taps(const ExperimentConfig& c, std::span<const Session> sessions) {
  AuthResults out;
  for (auto condition : c.conditions) {
    const auto split = checked_split(c, sessions, condition);
    for (auto mode : {ExtractMode::during, ExtractMode::between}) {
      const auto data = prepare(split, FeatureSet::hmog, extract_options(c, mode));
      if (data.train.rows() == 0 && mode == ExtractMode::during) {
        throw data_error("no taps in " + std::string(condition_name(condition)) + " sessions");
      }
      const auto params = choose_params(c, FeatureSet::hmog, data.train);
      const std::string name = mode == ExtractMode::during ? "hmog_during" : "hmog_between";
      auto ev = evaluate_set(c, condition, name, data, params);
      std::move(ev.rows.begin(), ev.rows.end(), std::back_inserter(out.rows));
      std::move(ev.failures.begin(), ev.failures.end(), std::back_inserter(out.failures));
    }
  }
  require_feasible(out);
  return out;
}

std::vector<RateRow> run_rate_sweep(const ExperimentConfig& c, std::span<const Session> sessions) {
  std::vector<RateRow> out;
  for (auto factor : c.downsample_factors) {
    std::vector<Session> reduced;
    reduced.reserve(sessions.size());
    for (const auto& s : sessions) reduced.push_back(factor == 1 ? s : downsample(s, factor));
    for (auto condition : c.conditions) {
      const auto split = checked_split(c, reduced, condition);
      const auto data = prepare(split, FeatureSet::hmog, extract_options(c, ExtractMode::during));
      const auto params = choose_params(c, FeatureSet::hmog, data.train);
      const auto ev = evaluate_set(c, condition, "hmog", data, params);
      const double rate =
          split.train.front().stream(SensorKind::accelerometer).nominal_rate_hz;
      for (const auto& row : ev.rows) {
        out.push_back({condition, factor, rate, row.scan_seconds, row.eer, row.infeasible});
      }
    }
  }
  return out;
}

// --- Key generation --------------------------------------------------------------

namespace {

// Scan vectors of several feature sets joined on (user, session, window).
FeatureMatrix join_windows(std::span<const FeatureMatrix> parts) {
  using Key = std::tuple<std::string, std::string, Millis>;
  std::vector<std::string> columns;
  std::map<Key, std::vector<double>> rows;
  std::vector<Key> order;
  std::size_t offset = 0;
  std::size_t width = 0;
  for (const auto& p : parts) width += p.columns.size();
  for (const auto& p : parts) {
    columns.insert(columns.end(), p.columns.begin(), p.columns.end());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const auto ur = std::size_t(r);
      Key key(p.user_ids[ur], p.session_ids[ur], p.t_ms[ur]);
      auto [it, fresh] = rows.emplace(key, std::vector<double>(width, kInvalid));
      if (fresh) order.push_back(key);
      for (Eigen::Index k = 0; k < p.cols(); ++k) {
        it->second[offset + std::size_t(k)] = p.values(r, k);
      }
    }
    offset += p.columns.size();
  }
  std::sort(order.begin(), order.end());
  FeatureMatrixBuilder builder(columns);
  for (const auto& key : order) {
    builder.add(std::get<0>(key), std::get<1>(key), std::get<2>(key), rows[key]);
  }
  return std::move(builder).build();
}

// Indices of the k best columns: Fisher ranking, or for key holds the most
// frequently observed keys.
std::vector<Eigen::Index> best_columns(const FeatureMatrix& raw, const FeatureMatrix& scans,
                                       FeatureSet set, std::size_t k) {
  const auto d = std::size_t(scans.cols());
  std::vector<Eigen::Index> order(d);
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  if (set == FeatureSet::keyhold) {
    std::vector<std::size_t> count(d, 0);
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
      for (std::size_t c = 0; c < d; ++c) count[c] += is_valid(raw.values(r, Eigen::Index(c)));
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return count[a] > count[b]; });
  } else {
    const auto scores = fisher_scores(scans);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return scores[a] > scores[b]; });
  }
  if (k > 0 && k < order.size()) order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

bkg::Symbol next_prime(bkg::Symbol from) {
  bkg::Symbol p = std::max<bkg::Symbol>(from, 3);
  while (!bkg::is_prime(p)) ++p;
  return p;
}

Eigen::VectorXd mean_vector(const FeatureMatrix& m) { return nan_mean_stdev(m.values).first; }

}  // namespace

BkgResults run_bkg(const ExperimentConfig& c, std::span<const Session> sessions) {
  BkgResults out;
  const std::string password =
      c.bkg.password.empty() ? std::string(bkg::kDefaultPassword) : c.bkg.password;
  const auto sets = c.bkg.sets.empty() ? default_bkg_sets() : c.bkg.sets;
  for (std::size_t ci = 0; ci < c.conditions.size(); ++ci) {
    const auto condition = c.conditions[ci];
    const auto split = checked_split(c, sessions, condition);
    const auto options = extract_options(c, ExtractMode::during);
    std::map<FeatureSet, SetData> cache;
    for (std::size_t si = 0; si < sets.size(); ++si) {
      const auto& set = sets[si];
      BkgRow row;
      row.condition = condition;
      row.set = set.name;

      // Scan vectors per part, restricted to the part's best columns.
      std::vector<FeatureMatrix> train_parts;
      std::vector<FeatureMatrix> test_parts;
      std::set<std::string> enrollable;
      bool first = true;
      for (const auto& [fs, k] : set.parts) {
        if (!cache.count(fs)) cache.emplace(fs, prepare(split, fs, options));
        const auto& data = cache.at(fs);
        if (data.train.rows() == 0) throw infeasible_error("bkg: no " + set.name + " training vectors");
        const auto train_scans = scan_aggregate(data.train, c.bkg.scan_seconds, c.scan_origin);
        const auto test_scans = scan_aggregate(data.test, c.bkg.scan_seconds, c.scan_origin);
        const auto cols = best_columns(data.train, train_scans, fs, k);
        train_parts.push_back(train_scans.select_columns(cols));
        test_parts.push_back(test_scans.select_columns(cols));
        // Users below the enrollment floor in any part are left out.
        std::set<std::string> ok;
        for (const auto& u : users_in_order(data.train)) {
          if (std::size_t(data.train.rows_of_user(u).rows()) >= c.min_vectors) ok.insert(u);
        }
        if (first) {
          enrollable = ok;
        } else {
          std::set<std::string> both;
          std::set_intersection(enrollable.begin(), enrollable.end(), ok.begin(), ok.end(),
                                std::inserter(both, both.begin()));
          enrollable = both;
        }
        first = false;
      }
      const FeatureMatrix train = join_windows(train_parts);
      const FeatureMatrix test = join_windows(test_parts);

      std::vector<std::string> users;
      for (const auto& u : users_in_order(train)) {
        if (enrollable.count(u) && test.rows_of_user(u).rows() > 0) users.push_back(u);
      }
      if (users.size() < 2) throw infeasible_error("bkg: fewer than two enrollable users for " + set.name);

      const auto spec = bkg::fit_discretization(
          train, 0, {c.bkg.lower_percentile, c.bkg.upper_percentile});
      const std::size_t n = spec.size();
      const bkg::Symbol p = c.bkg.p.value_or(next_prime(bkg::Symbol(2 * n + 1)));
      auto full_spec = bkg::fit_discretization(train, p, {c.bkg.lower_percentile, c.bkg.upper_percentile});

      // Committed vector per user: discretised mean of its training scans.
      std::vector<bkg::Word> enrolled;
      for (const auto& u : users) {
        const Eigen::VectorXd mu = mean_vector(train.rows_of_user(u));
        enrolled.push_back(bkg::discretize(full_spec, std::span<const double>(mu.data(), std::size_t(mu.size()))));
      }
      auto discretize_rows = [&](const FeatureMatrix& m) {
        std::vector<bkg::Word> words;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          const Eigen::VectorXd v = m.values.row(r).transpose();
          words.push_back(bkg::discretize(full_spec, std::span<const double>(v.data(), std::size_t(v.size()))));
        }
        return words;
      };

      std::size_t l = 0;
      // False when the radius needed at the training equal-error point exceeds
      // what any code of this length corrects.
      bool radius_reachable = true;
      if (c.bkg.l) {
        l = *c.bkg.l;
      } else {
        // Correction radius at the training equal-error point.
        std::vector<double> g;
        std::vector<double> im;
        for (std::size_t i = 0; i < users.size(); ++i) {
          const auto words = discretize_rows(train.rows_of_user(users[i]));
          for (std::size_t j = 0; j < users.size(); ++j) {
            const auto& probe_words = j == i ? words : discretize_rows(train.rows_of_user(users[j]));
            for (const auto& w : probe_words) {
              (j == i ? g : im).push_back(double(bkg::lee_distance(w, enrolled[i], p)));
            }
          }
        }
        const auto curve = det_curve(g, im);
        double radius = 0.0;
        for (const auto& pt : curve) {
          if (pt.far >= pt.frr) {
            radius = std::max(0.0, pt.threshold);
            break;
          }
        }
        const auto r = std::size_t(radius) + 1;
        radius_reachable = r < n;
        l = radius_reachable ? n - r : 1;
      }
      if (l == 0 || l >= n) throw config_error("bkg: l must satisfy 0 < l < n = " + std::to_string(n));
      if (p < bkg::Symbol(2 * (n - l) + 1) || bkg::Symbol(n) > p) {
        throw config_error("bkg: p = " + std::to_string(p) + " too small for n = " +
                           std::to_string(n) + ", l = " + std::to_string(l));
      }
      const auto code = bkg::GrsCode::build(n, l, p);
      row.n = n;
      row.l = l;
      row.p = p;
      row.log2_code_size = code.log2_size();
      row.users = users.size();

      std::vector<bkg::Commitment> commitments;
      for (std::size_t i = 0; i < users.size(); ++i) {
        std::seed_seq seq{std::uint64_t(c.seed), std::uint64_t(ci), std::uint64_t(si), std::uint64_t(i)};
        std::mt19937_64 rng(seq);
        auto result = bkg::commit(enrolled[i], password, code, rng);
        result.commitment.user_id = users[i];
        result.commitment.spec = full_spec;
        commitments.push_back(std::move(result.commitment));
      }

      // Zero-effort attempts with every later scan vector.
      std::vector<std::vector<bkg::Word>> probes(users.size());
      for (std::size_t j = 0; j < users.size(); ++j) probes[j] = discretize_rows(test.rows_of_user(users[j]));
      std::vector<double> g;
      std::vector<double> im;
      std::size_t g_open = 0;
      std::size_t im_open = 0;
      std::vector<std::vector<std::pair<double, bool>>> attempts(users.size() * users.size());
      parallel_for(attempts.size(), [&](std::size_t k) {
        const std::size_t i = k / users.size();
        const std::size_t j = k % users.size();
        for (const auto& y : probes[j]) {
          const bool opened = bkg::open(y, commitments[i], password, code).has_value();
          attempts[k].emplace_back(double(bkg::lee_distance(y, enrolled[i], p)), opened);
        }
      });
      for (std::size_t k = 0; k < attempts.size(); ++k) {
        const bool genuine = k / users.size() == k % users.size();
        for (const auto& [d, opened] : attempts[k]) {
          (genuine ? g : im).push_back(d);
          (genuine ? g_open : im_open) += opened;
        }
      }
      row.eer = eer(g, im);
      row.far = double(im_open) / double(im.size());
      row.frr = 1.0 - double(g_open) / double(g.size());
      row.key_generation_possible = radius_reachable && g_open > 0;

      // Population attack with each user's mean later vector.
      std::vector<std::vector<bool>> opens(users.size(), std::vector<bool>(users.size(), false));
      for (std::size_t j = 0; j < users.size(); ++j) {
        const Eigen::VectorXd mu = mean_vector(test.rows_of_user(users[j]));
        const auto y = bkg::discretize(full_spec, std::span<const double>(mu.data(), std::size_t(mu.size())));
        for (std::size_t i = 0; i < users.size(); ++i) {
          opens[j][i] = i != j && bkg::open(y, commitments[i], password, code).has_value();
        }
      }
      const auto gd = bkg::guessing_distance(opens);
      row.mean_gd = gd.mean_gd;
      row.non_guessed = gd.non_guessed_fraction;

      std::ostringstream text;
      bkg::write_commitments(text, commitments);
      out.commitments.push_back(text.str());
      out.rows.push_back(row);
    }
  }
  return out;
}

// --- Output -------------------------------------------------------------------

namespace {

std::ofstream open_output(const std::string& path, const ExperimentConfig& c) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << output_banner(c) << '\n';
  return out;
}

std::string scan_tag(double s) { return format_double(s) + "s"; }

void write_summary(const ExperimentConfig& c, const std::string& path, json body) {
  body["config"] = config_to_json(c);
  body["config_sha256"] = config_hash(c);
  body["seed"] = c.seed;
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << body.dump(2) << '\n';
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_auth_results(const ExperimentConfig& c, const AuthResults& r, const std::string& dir) {
  auto results = open_output(dir + "/results.csv", c);
  results << "condition,feature_set,scan_seconds,eer,genuine,impostor,enrolled,infeasible,params\n";
  json rows = json::array();
  for (const auto& row : r.rows) {
    const std::string cond(condition_name(row.condition));
    results << cond << ',' << row.feature_set << ',' << format_double(row.scan_seconds) << ','
            << format_double(row.eer) << ',' << row.genuine << ',' << row.impostor << ','
            << row.enrolled << ',' << (row.infeasible ? 1 : 0) << ',' << row.params << '\n';
    rows.push_back({{"condition", cond},
                    {"feature_set", row.feature_set},
                    {"scan_seconds", row.scan_seconds},
                    {"eer", row.eer},
                    {"infeasible", row.infeasible},
                    {"params", row.params}});
    const std::string stem = cond + "_" + row.feature_set + "_" + scan_tag(row.scan_seconds);
    if (!row.det.empty()) {
      auto det = open_output(dir + "/det/" + stem + ".csv", c);
      write_det_csv(det, row.det);
    }
    if (c.write_scores && !row.scores.genuine.empty()) {
      auto scores = open_output(dir + "/scores/" + stem + ".csv", c);
      write_scores_csv(scores, row.scores);
    }
  }
  auto failures = open_output(dir + "/enrollment_failures.csv", c);
  failures << "condition,feature_set,user_id,reason\n";
  for (const auto& f : r.failures) {
    failures << condition_name(f.condition) << ',' << f.feature_set << ',' << f.user_id << ",\""
             << f.reason << "\"\n";
  }
  write_summary(c, dir + "/summary.json",
                {{"results", rows}, {"fusion_weights", r.fusion_weights},
                 {"enrollment_failures", r.failures.size()}});
}

void write_rate_results(const ExperimentConfig& c, std::span<const RateRow> rows,
                        const std::string& dir) {
  auto out = open_output(dir + "/rate_sweep.csv", c);
  out << "condition,factor,rate_hz,scan_seconds,eer,infeasible\n";
  json body = json::array();
  for (const auto& r : rows) {
    const std::string cond(condition_name(r.condition));
    out << cond << ',' << r.factor << ',' << format_double(r.rate_hz) << ','
        << format_double(r.scan_seconds) << ',' << format_double(r.eer) << ','
        << (r.infeasible ? 1 : 0) << '\n';
    body.push_back({{"condition", cond},
                    {"factor", r.factor},
                    {"rate_hz", r.rate_hz},
                    {"scan_seconds", r.scan_seconds},
                    {"eer", r.eer},
                    {"infeasible", r.infeasible}});
  }
  write_summary(c, dir + "/rate_sweep.json", {{"results", body}});
}

void write_bkg_results(const ExperimentConfig& c, const BkgResults& r, const std::string& dir) {
  auto out = open_output(dir + "/bkg.csv", c);
  out << "condition,features,n,l,p,log2_code_size,eer,far,frr,mean_guessing_distance,"
         "non_guessed,users,status\n";
  json body = json::array();
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    const auto& row = r.rows[k];
    const std::string cond(condition_name(row.condition));
    const std::string status =
        row.key_generation_possible ? "ok" : "key generation not possible";
    out << cond << ',' << row.set << ',' << row.n << ',' << row.l << ',' << row.p << ','
        << format_double(row.log2_code_size) << ',' << format_double(row.eer) << ','
        << format_double(row.far) << ',' << format_double(row.frr) << ','
        << format_double(row.mean_gd) << ',' << format_double(row.non_guessed) << ','
        << row.users << ',' << status << '\n';
    body.push_back({{"condition", cond},
                    {"features", row.set},
                    {"n", row.n},
                    {"l", row.l},
                    {"p", row.p},
                    {"log2_code_size", row.log2_code_size},
                    {"eer", row.eer},
                    {"far", row.far},
                    {"frr", row.frr},
                    {"mean_guessing_distance", number_or_null(row.mean_gd)},
                    {"non_guessed", row.non_guessed},
                    {"users", row.users},
                    {"status", status}});
    auto commitments = open_output(dir + "/commitments/" + cond + "_" + row.set + ".txt", c);
    commitments << r.commitments[k];
  }
  write_summary(c, dir + "/bkg.json", {{"results", body}});
}

}  // namespace hmog
