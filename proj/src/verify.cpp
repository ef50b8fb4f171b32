#include "hmog/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <tuple>

#include "hmog/csv.hpp"
#include "hmog/parallel.hpp"

namespace hmog {

std::string_view verifier_name(Verifier v) {
  return v == Verifier::scaled_manhattan ? "sm" : "se";
}

std::optional<Verifier> parse_verifier(std::string_view name) {
  if (name == "sm") return Verifier::scaled_manhattan;
  if (name == "se") return Verifier::scaled_euclidean;
  return std::nullopt;
}

double score(const Template& t, const Eigen::Ref<const Eigen::VectorXd>& projected,
             Verifier verifier) {
  if (projected.size() != t.score_mean.size()) {
    throw data_error("score: vector has " + std::to_string(projected.size()) +
                     " dimensions, template " + t.user_id + " has " +
                     std::to_string(t.score_mean.size()));
  }
  return verifier == Verifier::scaled_manhattan
             ? scaled_manhattan(projected, t.score_mean, t.score_stdev)
             : scaled_euclidean(projected, t.score_mean, t.score_stdev);
}

std::vector<double> ScoreSet::genuine_scores() const {
  std::vector<double> out;
  out.reserve(genuine.size());
  for (const auto& e : genuine) out.push_back(e.score);
  return out;
}

std::vector<double> ScoreSet::impostor_scores() const {
  std::vector<double> out;
  out.reserve(impostor.size());
  for (const auto& e : impostor) out.push_back(e.score);
  return out;
}

ScoreSet gen_scores(std::span<const Template> templates, const FeatureMatrix& auth,
                    Verifier verifier) {
  std::vector<std::vector<Eigen::Index>> index;
  for (const auto& t : templates) index.push_back(t.resolve(auth.columns));

  std::vector<ScoreSet> per_row(std::size_t(auth.rows()));
  parallel_for(per_row.size(), [&](std::size_t r) {
    const auto& actual = auth.user_ids[r];
    const bool enrolled = std::any_of(templates.begin(), templates.end(),
                                      [&](const Template& t) { return t.user_id == actual; });
    if (!enrolled) return;
    for (std::size_t k = 0; k < templates.size(); ++k) {
      const auto& t = templates[k];
      const Eigen::VectorXd v = t.project(auth.values.row(Eigen::Index(r)), index[k]);
      ScoreEntry e{t.user_id, actual, auth.session_ids[r], auth.t_ms[r], score(t, v, verifier)};
      (e.genuine() ? per_row[r].genuine : per_row[r].impostor).push_back(std::move(e));
    }
  });
  ScoreSet out;
  for (auto& s : per_row) {
    std::move(s.genuine.begin(), s.genuine.end(), std::back_inserter(out.genuine));
    std::move(s.impostor.begin(), s.impostor.end(), std::back_inserter(out.impostor));
  }
  return out;
}

// --- Error rates -------------------------------------------------------------

std::vector<DetPoint> det_curve(std::span<const double> genuine,
                                std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) {
    throw data_error("det_curve: genuine and impostor scores must be nonempty");
  }
  std::vector<double> g(genuine.begin(), genuine.end());
  std::vector<double> i(impostor.begin(), impostor.end());
  std::sort(g.begin(), g.end());
  std::sort(i.begin(), i.end());
  std::vector<double> thresholds;
  std::merge(g.begin(), g.end(), i.begin(), i.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double ng = double(g.size());
  const double ni = double(i.size());
  std::vector<DetPoint> curve;
  curve.reserve(thresholds.size() + 1);
  curve.push_back({-std::numeric_limits<double>::infinity(), 0.0, 1.0});
  std::size_t gi = 0;
  std::size_t ii = 0;
  for (double th : thresholds) {
    while (gi < g.size() && g[gi] <= th) ++gi;
    while (ii < i.size() && i[ii] <= th) ++ii;
    curve.push_back({th, double(ii) / ni, double(g.size() - gi) / ng});
  }
  return curve;
}

double eer(std::span<const double> genuine, std::span<const double> impostor) {
  const auto curve = det_curve(genuine, impostor);
  // D = FAR - FRR rises from -1 at the reject-all point to FAR >= 0 at the end,
  // where FRR = 0, so a first nonnegative point always exists.
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const double d = curve[k].far - curve[k].frr;
    if (d < 0.0) continue;
    if (d == 0.0) return curve[k].far;
    const double d_prev = curve[k - 1].far - curve[k - 1].frr;
    const double alpha = -d_prev / (d - d_prev);
    return curve[k - 1].far + alpha * (curve[k].far - curve[k - 1].far);
  }
  return curve.back().far;
}

double eer(const ScoreSet& scores) {
  return eer(scores.genuine_scores(), scores.impostor_scores());
}

DetPoint rates_at(std::span<const double> genuine, std::span<const double> impostor,
                  double threshold) {
  if (genuine.empty() || impostor.empty()) {
    throw data_error("rates_at: genuine and impostor scores must be nonempty");
  }
  const auto accepted = [&](std::span<const double> s) {
    return double(std::count_if(s.begin(), s.end(), [&](double v) { return v <= threshold; }));
  };
  return {threshold, accepted(impostor) / double(impostor.size()),
          1.0 - accepted(genuine) / double(genuine.size())};
}

void write_scores_csv(std::ostream& out, const ScoreSet& scores) {
  out << "kind,claimed,actual,t_ms,score,session_id\n";
  auto rows = [&](const std::vector<ScoreEntry>& entries, const char* kind) {
    for (const auto& e : entries) {
      out << kind << ',' << e.claimed << ',' << e.actual << ',' << e.t_ms << ','
          << format_double(e.score) << ',' << e.session << '\n';
    }
  };
  rows(scores.genuine, "genuine");
  rows(scores.impostor, "impostor");
}

ScoreSet read_scores_csv(std::istream& in) {
  CsvReader reader(in, "scores");
  const auto kind = reader.column("kind");
  const auto claimed = reader.column("claimed");
  const auto actual = reader.column("actual");
  const auto session = reader.find_column("session_id");
  const auto t = reader.column("t_ms");
  const auto value = reader.column("score");
  ScoreSet out;
  while (reader.next()) {
    ScoreEntry e{std::string(reader.field(claimed)), std::string(reader.field(actual)),
                 session ? std::string(reader.field(*session)) : std::string(),
                 reader.integer(t), reader.number(value)};
    const auto k = reader.field(kind);
    if (k == "genuine") {
      out.genuine.push_back(std::move(e));
    } else if (k == "impostor") {
      out.impostor.push_back(std::move(e));
    } else {
      reader.fail("unknown score kind '" + std::string(k) + "'");
    }
  }
  return out;
}

void write_det_csv(std::ostream& out, std::span<const DetPoint> curve) {
  out << "threshold,far,frr\n";
  for (const auto& p : curve) {
    out << (std::isinf(p.threshold) ? std::string("-inf") : format_double(p.threshold))
        << ',' << format_double(p.far) << ',' << format_double(p.frr) << '\n';
  }
}

// --- Fusion ------------------------------------------------------------------

MinMax fit_min_max(std::span<const double> values) {
  MinMax m{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (double v : values) {
    if (!is_valid(v)) continue;
    m.min = std::min(m.min, v);
    m.max = std::max(m.max, v);
  }
  if (m.min > m.max) m = {0.0, 0.0};
  return m;
}

double fuse(std::span<const std::optional<double>> normalized,
            std::span<const double> weights) {
  if (normalized.size() != weights.size()) {
    throw data_error("fuse: " + std::to_string(normalized.size()) + " scores but " +
                     std::to_string(weights.size()) + " weights");
  }
  double total_weight = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < normalized.size(); ++c) {
    if (!normalized[c]) continue;
    total_weight += weights[c];
    ++present;
  }
  if (present == 0) throw data_error("fuse: every channel is missing");
  double fused = 0.0;
  for (std::size_t c = 0; c < normalized.size(); ++c) {
    if (!normalized[c]) continue;
    const double w = total_weight > 0.0 ? weights[c] / total_weight : 1.0 / double(present);
    fused += w * *normalized[c];
  }
  return fused;
}

FusionTable align_scores(std::span<const std::string> channels,
                         std::span<const ScoreSet> sets) {
  if (channels.size() != sets.size() || sets.empty()) {
    throw data_error("align_scores: need one score set per channel");
  }
  using Key = std::tuple<std::string, std::string, std::string, Millis>;
  std::map<Key, std::vector<double>> rows;
  FusionTable table;
  table.channels.assign(channels.begin(), channels.end());
  for (std::size_t c = 0; c < sets.size(); ++c) {
    std::vector<double> pool;
    for (const auto* list : {&sets[c].genuine, &sets[c].impostor}) {
      for (const auto& e : *list) {
        auto& row = rows[Key(e.claimed, e.actual, e.session, e.t_ms)];
        row.resize(sets.size(), kInvalid);
        row[c] = e.score;
        pool.push_back(e.score);
      }
    }
    table.bounds.push_back(fit_min_max(pool));
  }
  table.scores.resize(Eigen::Index(rows.size()), Eigen::Index(sets.size()));
  Eigen::Index r = 0;
  for (auto& [key, values] : rows) {
    const auto& [claimed, actual, session, t] = key;
    table.keys.push_back({claimed, actual, session, t, 0.0});
    values.resize(sets.size(), kInvalid);
    for (std::size_t c = 0; c < sets.size(); ++c) {
      const double v = values[c];
      table.scores(r, Eigen::Index(c)) = is_valid(v) ? table.bounds[c](v) : kInvalid;
    }
    ++r;
  }
  return table;
}

ScoreSet fuse_table(const FusionTable& table, std::span<const double> weights) {
  ScoreSet out;
  std::vector<std::optional<double>> row(table.channels.size());
  for (std::size_t r = 0; r < table.keys.size(); ++r) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double v = table.scores(Eigen::Index(r), Eigen::Index(c));
      row[c] = is_valid(v) ? std::optional<double>(v) : std::nullopt;
    }
    ScoreEntry e = table.keys[r];
    e.score = fuse(row, weights);
    (e.genuine() ? out.genuine : out.impostor).push_back(std::move(e));
  }
  return out;
}

std::vector<std::vector<double>> simplex_grid(std::size_t channels, double step) {
  if (channels == 0 || !(step > 0.0 && step <= 1.0)) {
    throw config_error("simplex_grid: need channels > 0 and step in (0, 1]");
  }
  const auto units = static_cast<int>(std::lround(1.0 / step));
  if (std::abs(double(units) * step - 1.0) > 1e-9) {
    throw config_error("simplex_grid: step must divide 1");
  }
  std::vector<std::vector<double>> grid;
  std::vector<int> parts(channels, 0);
  // Recursive enumeration with the first channel taking the most units first.
  std::function<void(std::size_t, int)> fill = [&](std::size_t c, int left) {
    if (c + 1 == channels) {
      parts[c] = left;
      std::vector<double> w(channels);
      for (std::size_t k = 0; k < channels; ++k) w[k] = double(parts[k]) / double(units);
      grid.push_back(std::move(w));
      return;
    }
    for (int u = left; u >= 0; --u) {
      parts[c] = u;
      fill(c + 1, left - u);
    }
  };
  fill(0, units);
  return grid;
}

FusionSearch search_fusion_weights(const FusionTable& table, double step) {
  const auto grid = simplex_grid(table.channels.size(), step);
  std::vector<double> eers(grid.size());
  parallel_for(grid.size(), [&](std::size_t k) { eers[k] = eer(fuse_table(table, grid[k])); });
  const auto best = std::min_element(eers.begin(), eers.end()) - eers.begin();
  return {grid[std::size_t(best)], eers[std::size_t(best)]};
}

}  // namespace hmog
