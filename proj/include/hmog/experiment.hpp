#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmog/bkg/field.hpp"
#include "hmog/corpus.hpp"
#include "hmog/cross_validation.hpp"
#include "hmog/hmog_features.hpp"
#include "hmog/pipeline.hpp"
#include "hmog/touchkeys.hpp"
#include "hmog/verify.hpp"

#include "json.hpp"

namespace hmog {

enum class FeatureSet : std::uint8_t { hmog, tap, keyhold, digraph };

std::string_view feature_set_name(FeatureSet s);
std::optional<FeatureSet> parse_feature_set(std::string_view name);

struct ExtractOptions {
  ExtractMode mode = ExtractMode::during;
  BetweenTapParams between;
  bool include_magnetometer = false;
  KeyUniverse keys;
};

/// Feature rows for every session. Keystroke sets come out dense over
/// `columns` when given, else over the features observed in the sessions.
FeatureMatrix extract_feature_set(std::span<const Session> sessions, FeatureSet set,
                                  const ExtractOptions& options,
                                  const std::vector<std::string>* columns = nullptr);

/// Per user and condition: the first `train_sessions` sessions (corpus order)
/// train, the rest test. Users with no test session are left out.
struct SessionSplit {
  std::vector<Session> train;
  std::vector<Session> test;
};
SessionSplit split_sessions(std::span<const Session> sessions, Condition condition,
                            std::size_t train_sessions = 2);

/// Cross-validation grid; expand() takes the product of selector settings,
/// PCA options and keystroke filter settings.
struct GridSpec {
  std::vector<double> fisher_fractions{0.80, 0.85, 0.90, 0.95, 1.00};
  std::vector<double> mrmr_thresholds;
  bool include_unselected = false;
  std::vector<std::optional<double>> pca_fractions{std::nullopt};
  std::vector<double> l_ms{std::numeric_limits<double>::infinity()};
  std::vector<std::size_t> m_min{0};

  std::vector<PipelineParams> expand(bool keystroke) const;
};

/// One BKG feature vector: the best `k` features of each listed set
/// (k = 0 keeps all).
struct BkgSet {
  std::string name;
  std::vector<std::pair<FeatureSet, std::size_t>> parts;
};

struct BkgOptions {
  /// Empty means hmog (13), tap (all), keyhold (8) and hmog+tap (3 tap).
  std::vector<BkgSet> sets;
  /// Defaults to the smallest prime >= 2n + 1.
  std::optional<bkg::Symbol> p;
  /// Defaults to n minus the training-set Lee distance at the equal error
  /// point, minus one.
  std::optional<std::size_t> l;
  double scan_seconds = 60.0;
  std::string password;
  double lower_percentile = 0.01;
  double upper_percentile = 0.99;
};

struct ExperimentConfig {
  /// Corpus directory; a synthetic corpus is generated when empty.
  std::string corpus_dir;
  std::string mapping_file;
  std::size_t synth_users = 8;
  std::uint64_t synth_seed = 1;
  double synth_session_seconds = 180.0;

  std::vector<Condition> conditions{Condition::sitting, Condition::walking};
  std::vector<FeatureSet> feature_sets{FeatureSet::hmog};
  Verifier verifier = Verifier::scaled_manhattan;
  std::vector<double> scan_seconds{20, 40, 60, 80, 100, 120, 140};
  std::size_t train_sessions = 2;

  bool cross_validate = false;
  std::size_t cv_folds = 10;
  GridSpec grid;
  /// Used for every feature set when cross-validation is off.
  PipelineParams params;
  /// Keystroke latency filter applied when cross-validation is off.
  double keystroke_l_ms = std::numeric_limits<double>::infinity();
  std::size_t keystroke_m_min = 0;
  std::size_t min_vectors = kMinEnrollmentVectors;
  /// Scan windows start at this session time so channels align for fusion.
  Millis scan_origin = 0;

  bool fuse = true;
  /// Fixed weights per feature set; grid search when empty.
  std::vector<double> fusion_weights;
  double fusion_step = 0.05;

  std::vector<std::size_t> downsample_factors{1, 2, 6, 20};
  BetweenTapParams between;
  bool include_magnetometer = false;
  std::vector<std::string> extra_keys;
  bool write_scores = false;

  BkgOptions bkg;

  std::string output_dir;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

/// Unknown keys and malformed values are config errors.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::json config_to_json(const ExperimentConfig& c);
/// SHA-256 of the canonical JSON form.
std::string config_hash(const ExperimentConfig& c);
std::string sha256_hex(std::string_view data);

/// The corpus named by the config, or the synthetic one.
std::vector<Session> load_sessions(const ExperimentConfig& c);

// --- Results -------------------------------------------------------------------

struct AuthRow {
  Condition condition = Condition::sitting;
  std::string feature_set;
  double scan_seconds = 0.0;
  double eer = 0.5;
  std::size_t genuine = 0;
  std::size_t impostor = 0;
  std::size_t enrolled = 0;
  bool infeasible = false;
  std::string params;
  std::vector<DetPoint> det;
  /// Filled only when the config asks for score files.
  ScoreSet scores;
};

struct EnrollmentRecord {
  Condition condition = Condition::sitting;
  std::string feature_set;
  std::string user_id;
  std::string reason;
};

struct AuthResults {
  std::vector<AuthRow> rows;
  std::vector<EnrollmentRecord> failures;
  /// Fusion weights chosen per (condition, scan), same order as fused rows.
  std::vector<std::vector<double>> fusion_weights;
};

/// Train on the first sessions, score the rest, per condition, feature set
/// and scan length, plus fusion of the feature sets.
AuthResults run_auth(const ExperimentConfig& c, std::span<const Session> sessions);
/// HMOG during taps against between taps.
AuthResults run_between_taps(const ExperimentConfig& c, std::span<const Session> sessions);

struct RateRow {
  Condition condition = Condition::sitting;
  std::size_t factor = 1;
  double rate_hz = 100.0;
  double scan_seconds = 0.0;
  double eer = 0.5;
  bool infeasible = false;
};

/// HMOG authentication after keeping every k-th sensor reading.
std::vector<RateRow> run_rate_sweep(const ExperimentConfig& c, std::span<const Session> sessions);

struct BkgRow {
  Condition condition = Condition::sitting;
  std::string set;
  std::size_t n = 0;
  std::size_t l = 0;
  bkg::Symbol p = 0;
  double log2_code_size = 0.0;
  /// From the Lee distance between probe and committed vector.
  double eer = 0.5;
  /// Error rates of open() at the code's correction radius.
  double far = 0.0;
  double frr = 1.0;
  double mean_gd = 0.0;
  double non_guessed = 0.0;
  std::size_t users = 0;
  bool key_generation_possible = false;
};

struct BkgResults {
  std::vector<BkgRow> rows;
  /// Serialised commitments per row.
  std::vector<std::string> commitments;
};

BkgResults run_bkg(const ExperimentConfig& c, std::span<const Session> sessions);

// --- Output -------------------------------------------------------------------

/// First line of every output file.
std::string output_banner(const ExperimentConfig& c);

void write_auth_results(const ExperimentConfig& c, const AuthResults& r,
                        const std::string& dir);
void write_rate_results(const ExperimentConfig& c, std::span<const RateRow> rows,
                        const std::string& dir);
void write_bkg_results(const ExperimentConfig& c, const BkgResults& r, const std::string& dir);

}  // namespace hmog
