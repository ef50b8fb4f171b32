#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hmog/bkg/field.hpp"

namespace hmog::bkg {

/// Normalised generalised Reed-Solomon [n, l] code over Z_p with code
/// locators alpha_i = i (1-based). The parity-check matrix has rows
/// alpha^0 ... alpha^(n-l-1); generator rows are v_i alpha_i^r.
class GrsCode {
 public:
  /// Throws a config error unless p is an odd prime and 0 < l < n <= p.
  /// Throws std::logic_error if the generator fails G H^T = 0.
  static GrsCode build(std::size_t n, std::size_t l, Symbol p);

  std::size_t n() const { return n_; }
  std::size_t l() const { return l_; }
  Symbol p() const { return p_; }
  /// Redundancy n - l; errors of Lee weight < redundancy are corrected.
  std::size_t redundancy() const { return n_ - l_; }
  Symbol locator(std::size_t i) const { return mod(Symbol(i + 1), p_); }

  const std::vector<Word>& generator() const { return g_; }
  const std::vector<Word>& parity_check() const { return h_; }
  const Word& multipliers() const { return v_; }

  /// log2 of the number of codewords, l log2 p.
  double log2_size() const;

  Word encode(std::span<const Symbol> message) const;
  /// H y^T; all zero iff y is a codeword.
  Word syndrome(std::span<const Symbol> y) const;
  bool is_codeword(std::span<const Symbol> y) const;

  /// Algebraic Lee-metric decoder: syndrome power sums, Newton's identities for
  /// the error-locator ratio, then the extended Euclidean algorithm on the key
  /// equation. Returns the codeword within Lee distance redundancy - 1 of y, or
  /// nothing when there is none.
  std::optional<Word> decode(std::span<const Symbol> y) const;

  /// Reference decoder: searches all p^l codewords. Returns the unique nearest
  /// codeword if it lies within Lee distance redundancy - 1.
  std::optional<Word> decode_brute_force(std::span<const Symbol> y) const;

  /// All p^l codewords, messages in lexicographic order.
  std::vector<Word> codewords() const;

 private:
  std::optional<Word> decode_located(std::span<const Symbol> y) const;
  void check_length(std::span<const Symbol> y) const;

  std::size_t n_ = 0;
  std::size_t l_ = 0;
  Symbol p_ = 0;
  std::vector<Word> h_;
  std::vector<Word> g_;
  Word v_;
};

}  // namespace hmog::bkg
