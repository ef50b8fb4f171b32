#pragma once

#include <optional>
#include <vector>

namespace hmog::bkg {

struct GuessingResult {
  /// Per target: number of ranked attempts until its commitment opened.
  std::vector<std::optional<std::size_t>> attempts;
  /// Mean log2(attempts) over guessed targets; NaN if none was guessed.
  double mean_gd = 0.0;
  /// Fraction of targets no impostor opened.
  double non_guessed_fraction = 0.0;
};

/// opens[j][i]: whether user j's probe opens user i's commitment (diagonal
/// ignored). Impostors are ranked by how many foreign commitments they open,
/// most first, ties by index, and tried against each target in that order.
GuessingResult guessing_distance(const std::vector<std::vector<bool>>& opens);

}  // namespace hmog::bkg
