// Command-line driver for the authentication and key-generation experiments.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"

#include "hmog/csv.hpp"
#include "hmog/experiment.hpp"
#include "hmog/parallel.hpp"

namespace {

using namespace hmog;

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
  std::size_t workers = 1;
  std::uint64_t seed = 1;
  std::string corpus;
  std::string mapping;
  std::size_t synth_users = 8;
  double synth_seconds = 180.0;
  std::vector<std::string> conditions;
  std::vector<std::string> feature_sets;
  std::vector<double> scans;
  std::string verifier;
  bool cross_validate = false;
  bool write_scores = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config; overrides flags");
  cmd->add_option("--output-dir", f.output_dir, "Result directory (default $HMOG_OUTPUT_DIR or ./results)");
  cmd->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--corpus", f.corpus, "Corpus directory (synthetic corpus when omitted)");
  cmd->add_option("--mapping", f.mapping, "Column mapping file");
  cmd->add_option("--synth-users", f.synth_users, "Users in the synthetic corpus");
  cmd->add_option("--synth-session-seconds", f.synth_seconds, "Synthetic session length");
  cmd->add_option("--condition", f.conditions, "sitting and/or walking");
  cmd->add_option("--feature-set", f.feature_sets, "hmog, tap, keyhold, digraph");
  cmd->add_option("--scan", f.scans, "Scan lengths in seconds");
  cmd->add_option("--verifier", f.verifier, "sm or se");
  cmd->add_flag("--cross-validate", f.cross_validate, "Choose parameters by cross-validation");
  cmd->add_flag("--write-scores", f.write_scores, "Write per-vector score files");
}

std::string default_output_dir() {
  const char* env = std::getenv("HMOG_OUTPUT_DIR");
  return env != nullptr && *env != '\0' ? env : "results";
}

ExperimentConfig make_config(const CommonFlags& f) {
  nlohmann::json j = nlohmann::json::object();
  if (!f.corpus.empty()) j["corpus"] = f.corpus;
  if (!f.mapping.empty()) j["mapping"] = f.mapping;
  j["synth"] = {{"users", f.synth_users}, {"session_seconds", f.synth_seconds}};
  if (!f.conditions.empty()) j["conditions"] = f.conditions;
  if (!f.feature_sets.empty()) j["feature_sets"] = f.feature_sets;
  if (!f.scans.empty()) j["scan_seconds"] = f.scans;
  if (!f.verifier.empty()) j["verifier"] = f.verifier;
  if (f.cross_validate) j["cross_validate"] = true;
  if (f.write_scores) j["write_scores"] = true;
  j["seed"] = f.seed;
  j["workers"] = f.workers;
  j["output_dir"] = f.output_dir.empty() ? default_output_dir() : f.output_dir;
  ExperimentConfig c = config_from_json(j);

  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw config_error("cannot read config " + f.config_path);
    nlohmann::json file;
    try {
      file = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw config_error("config " + f.config_path + ": " + e.what());
    }
    c = config_from_json(file, c);
  }
  set_worker_count(c.workers);
  return c;
}

template <typename T>
T require(const std::optional<T>& v, const std::string& what) {
  if (!v) throw config_error(what);
  return *v;
}

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read " + path);
  return in;
}

// Skips leading '#' banner lines.
std::istringstream strip_banner(std::istream& in) {
  std::string text;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header && line.rfind('#', 0) == 0) continue;
    header = false;
    text += line;
    text += '\n';
  }
  return std::istringstream(text);
}

void print_results(const AuthResults& r) {
  for (const auto& row : r.rows) {
    std::cout << condition_name(row.condition) << ' ' << row.feature_set << ' '
              << format_double(row.scan_seconds) << "s eer=" << format_double(row.eer)
              << (row.infeasible ? " (infeasible)" : "") << '\n';
  }
  if (!r.failures.empty()) std::cout << r.failures.size() << " enrollment failures\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous authentication experiments on phone sensor, touch and keystroke data"};
  app.require_subcommand(1);

  CommonFlags common;

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and write it in canonical form");
  std::string ingest_out;
  add_common(ingest, common);
  ingest->add_option("--out", ingest_out, "Destination corpus directory")->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
  std::string synth_out;
  add_common(synth, common);
  synth->add_option("--out", synth_out, "Destination corpus directory")->required();

  auto* extract = app.add_subcommand("extract", "Extract feature vectors");
  std::string extract_out;
  std::string extract_set = "hmog";
  std::string extract_mode = "during";
  add_common(extract, common);
  extract->add_option("--features", extract_set, "hmog, tap, keyhold or digraph");
  extract->add_option("--mode", extract_mode, "during or between (hmog only)");
  extract->add_option("--out", extract_out, "Feature CSV")->required();

  auto* train = app.add_subcommand("train", "Build per-user templates from a feature CSV");
  std::string train_in;
  std::string train_out;
  std::string selector = "none";
  double fisher_fraction = 1.0;
  double mrmr_threshold = 0.0;
  std::optional<double> pca_fraction;
  std::size_t min_vectors = kMinEnrollmentVectors;
  add_common(train, common);
  train->add_option("--features", train_in, "Training feature CSV")->required();
  train->add_option("--out", train_out, "Template JSON")->required();
  train->add_option("--selector", selector, "none, fisher or mrmr");
  train->add_option("--fisher-fraction", fisher_fraction);
  train->add_option("--mrmr-threshold", mrmr_threshold);
  train->add_option("--pca", pca_fraction, "Retained variance fraction");
  train->add_option("--min-vectors", min_vectors);

  auto* eval = app.add_subcommand("eval", "Run the authentication experiment, or score features against templates");
  std::string eval_templates;
  std::string eval_features;
  std::string eval_out;
  double eval_scan = 60.0;
  add_common(eval, common);
  eval->add_option("--templates", eval_templates, "Template JSON");
  eval->add_option("--features", eval_features, "Authentication feature CSV");
  eval->add_option("--scan-seconds", eval_scan, "Scan length for --features scoring");
  eval->add_option("--out", eval_out, "Score CSV for --features scoring");

  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse score files");
  std::vector<std::string> fuse_in;
  std::vector<double> fuse_weights;
  std::string fuse_out;
  double fuse_step = 0.05;
  add_common(fuse_cmd, common);
  fuse_cmd->add_option("--scores", fuse_in, "Score CSV per channel")->required();
  fuse_cmd->add_option("--weights", fuse_weights, "Fixed weights; grid search when omitted");
  fuse_cmd->add_option("--step", fuse_step, "Grid step");
  fuse_cmd->add_option("--out", fuse_out, "Fused score CSV")->required();

  auto* bkg_cmd = app.add_subcommand("bkg", "Key generation experiment");
  add_common(bkg_cmd, common);
  auto* sweep = app.add_subcommand("sweep", "Sampling-rate sweep");
  add_common(sweep, common);
  auto* between = app.add_subcommand("between", "HMOG during against between taps");
  add_common(between, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
  }

  try {
    const ExperimentConfig config = make_config(common);
    const std::string& dir = config.output_dir;
    const std::string banner = output_banner(config);

    if (ingest->parsed() || synth->parsed()) {
      if (ingest->parsed() && config.corpus_dir.empty()) throw config_error("ingest needs --corpus");
      const auto sessions = load_sessions(config);
      for (const auto& s : sessions) validate(s);
      write_corpus(ingest->parsed() ? ingest_out : synth_out, sessions, banner);
      std::cout << sessions.size() << " sessions written\n";
    } else if (extract->parsed()) {
      const auto set = require(parse_feature_set(extract_set), "unknown feature set " + extract_set);
      if (extract_mode != "during" && extract_mode != "between") {
        throw config_error("unknown mode " + extract_mode);
      }
      ExtractOptions options;
      options.mode = extract_mode == "during" ? ExtractMode::during : ExtractMode::between;
      options.between = config.between;
      options.include_magnetometer = config.include_magnetometer;
      options.keys = KeyUniverse(config.extra_keys);
      const auto sessions = load_sessions(config);
      const auto m = extract_feature_set(sessions, set, options);
      auto out = open_out(extract_out);
      out << banner << '\n';
      write_feature_csv(out, m);
      std::cout << m.rows() << " vectors x " << m.cols() << " features\n";
    } else if (train->parsed()) {
      auto in = open_in(train_in);
      auto body = strip_banner(in);
      const auto m = read_feature_csv(body);
      PipelineParams params;
      if (selector == "fisher") {
        params.selector = Selector::fisher;
      } else if (selector == "mrmr") {
        params.selector = Selector::mrmr;
      } else if (selector != "none") {
        throw config_error("unknown selector " + selector);
      }
      params.fisher_fraction = fisher_fraction;
      params.mrmr_threshold = mrmr_threshold;
      params.pca_fraction = pca_fraction;
      validate(params);
      const auto selected = select_features(m, params);
      std::vector<std::string> users;
      for (const auto& u : m.user_ids) {
        if (std::find(users.begin(), users.end(), u) == users.end()) users.push_back(u);
      }
      std::vector<Template> templates;
      for (const auto& u : users) {
        try {
          templates.push_back(build_template(m.rows_of_user(u), selected, params, min_vectors));
        } catch (const EnrollmentFailure& e) {
          std::cerr << "enrollment failed for " << u << ": " << e.what() << '\n';
        }
      }
      if (templates.empty()) throw infeasible_error("no user enrolled");
      auto out = open_out(train_out);
      write_templates(out, templates);
      std::cout << templates.size() << " of " << users.size() << " users enrolled\n";
    } else if (eval->parsed()) {
      if (eval_templates.empty() != eval_features.empty()) {
        throw config_error("eval needs both --templates and --features, or neither");
      }
      if (!eval_templates.empty()) {
        auto tin = open_in(eval_templates);
        const auto templates = read_templates(tin);
        auto fin = open_in(eval_features);
        auto body = strip_banner(fin);
        const auto auth = scan_aggregate(read_feature_csv(body), eval_scan, config.scan_origin);
        const auto scores = gen_scores(templates, auth, config.verifier);
        const std::string path = eval_out.empty() ? dir + "/scores.csv" : eval_out;
        auto out = open_out(path);
        out << banner << '\n';
        write_scores_csv(out, scores);
        if (scores.genuine.empty() || scores.impostor.empty()) {
          throw infeasible_error("need both genuine and impostor scores for an EER");
        }
        std::cout << "eer=" << format_double(eer(scores)) << '\n';
      } else {
        const auto sessions = load_sessions(config);
        const auto r = run_auth(config, sessions);
        write_auth_results(config, r, dir);
        print_results(r);
      }
    } else if (fuse_cmd->parsed()) {
      std::vector<ScoreSet> sets;
      for (const auto& path : fuse_in) {
        auto in = open_in(path);
        auto body = strip_banner(in);
        sets.push_back(read_scores_csv(body));
      }
      if (!fuse_weights.empty() && fuse_weights.size() != sets.size()) {
        throw config_error("need one weight per score file");
      }
      const auto table = align_scores(fuse_in, sets);
      const auto weights =
          fuse_weights.empty() ? search_fusion_weights(table, fuse_step).weights : fuse_weights;
      const auto fused = fuse_table(table, weights);
      auto out = open_out(fuse_out);
      out << banner << '\n';
      write_scores_csv(out, fused);
      std::cout << "weights=";
      for (std::size_t k = 0; k < weights.size(); ++k) {
        std::cout << (k ? "," : "") << format_double(weights[k]);
      }
      std::cout << '\n';
      if (!fused.genuine.empty() && !fused.impostor.empty()) {
        std::cout << "eer=" << format_double(eer(fused)) << '\n';
      }
    } else if (bkg_cmd->parsed()) {
      const auto sessions = load_sessions(config);
      const auto r = run_bkg(config, sessions);
      write_bkg_results(config, r, dir);
      for (const auto& row : r.rows) {
        std::cout << condition_name(row.condition) << ' ' << row.set << " n=" << row.n
                  << " l=" << row.l << " p=" << row.p << " eer=" << format_double(row.eer)
                  << " gd=" << (std::isnan(row.mean_gd) ? std::string("none") : format_double(row.mean_gd))
                  << (row.key_generation_possible ? "" : " (key generation not possible)")
                  << '\n';
      }
    } else if (sweep->parsed()) {
      const auto sessions = load_sessions(config);
      const auto rows = run_rate_sweep(config, sessions);
      write_rate_results(config, rows, dir);
      for (const auto& r : rows) {
        std::cout << condition_name(r.condition) << ' ' << format_double(r.rate_hz) << "Hz "
                  << format_double(r.scan_seconds) << "s eer=" << format_double(r.eer) << '\n';
      }
    } else if (between->parsed()) {
      const auto sessions = load_sessions(config);
      const auto r = run_between_taps(config, sessions);
      write_auth_results(config, r, dir);
      print_results(r);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::data);
  }
  return 0;
}
