#include "hmog/bkg/guessing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hmog::bkg {

GuessingResult guessing_distance(const std::vector<std::vector<bool>>& opens) {
  const std::size_t users = opens.size();
  if (users < 2) throw std::invalid_argument("guessing_distance: need at least two users");
  for (const auto& row : opens) {
    if (row.size() != users) throw std::invalid_argument("guessing_distance: matrix not square");
  }
  std::vector<std::size_t> opened(users, 0);
  for (std::size_t j = 0; j < users; ++j) {
    for (std::size_t i = 0; i < users; ++i) opened[j] += (i != j && opens[j][i]) ? 1 : 0;
  }
  std::vector<std::size_t> rank(users);
  std::iota(rank.begin(), rank.end(), std::size_t(0));
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return opened[a] > opened[b]; });

  GuessingResult out;
  out.attempts.assign(users, std::nullopt);
  double gd_sum = 0.0;
  std::size_t guessed = 0;
  for (std::size_t i = 0; i < users; ++i) {
    std::size_t attempt = 0;
    for (std::size_t j : rank) {
      if (j == i) continue;
      ++attempt;
      if (opens[j][i]) {
        out.attempts[i] = attempt;
        gd_sum += std::log2(double(attempt));
        ++guessed;
        break;
      }
    }
  }
  out.mean_gd = guessed ? gd_sum / double(guessed) : std::numeric_limits<double>::quiet_NaN();
  out.non_guessed_fraction = double(users - guessed) / double(users);
  return out;
}

}  // namespace hmog::bkg
