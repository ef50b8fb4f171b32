#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hmog/bkg/discretize.hpp"
#include "hmog/bkg/field.hpp"
#include "hmog/bkg/grs.hpp"

namespace hmog::bkg {

using Digest = std::array<std::uint8_t, 32>;

inline constexpr std::uint8_t kKeyDomain = 0x00;
inline constexpr std::uint8_t kTagDomain = 0x01;

/// HMAC-SHA-256 keyed by the codeword (2-byte big-endian per symbol) over the
/// UTF-8 bytes of z followed by the domain byte.
Digest prf(std::span<const Symbol> codeword, std::string_view z, std::uint8_t domain);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::optional<Digest> digest_from_hex(std::string_view hex);

/// Password used when the caller supplies none.
inline constexpr std::string_view kDefaultPassword = "hmog-bkg";

struct Commitment {
  std::string user_id;
  Symbol p = 0;
  std::size_t n = 0;
  std::size_t l = 0;
  DiscretizationSpec spec;
  /// x - c mod p.
  Word delta;
  Digest tag{};

  friend bool operator==(const Commitment& a, const Commitment& b) {
    return a.user_id == b.user_id && a.p == b.p && a.n == b.n && a.l == b.l &&
           a.spec.min == b.spec.min && a.spec.max == b.spec.max &&
           a.spec.d_range == b.spec.d_range && a.spec.fill == b.spec.fill &&
           a.delta == b.delta && a.tag == b.tag;
  }
};

/// Uniform value in [0, bound) by rejection, independent of the standard
/// library's distribution implementations.
Symbol uniform_below(std::mt19937_64& rng, Symbol bound);

struct CommitResult {
  Commitment commitment;
  Digest key{};
};

/// Binds a fresh key to the discretised vector x.
CommitResult commit(std::span<const Symbol> x, std::string_view z, const GrsCode& code,
                    std::mt19937_64& rng);

/// The key if y decodes to the committed codeword, else nothing.
std::optional<Digest> open(std::span<const Symbol> y, const Commitment& commitment,
                           std::string_view z, const GrsCode& code);

/// Versioned text records, one per commitment, separated by blank lines.
void write_commitments(std::ostream& out, std::span<const Commitment> commitments);
std::vector<Commitment> read_commitments(std::istream& in);

}  // namespace hmog::bkg
