#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hmog::bkg {

using Symbol = std::int64_t;
/// A vector over Z_p with entries in [0, p).
using Word = std::vector<Symbol>;

bool is_prime(Symbol p);

/// Canonical representative in [0, p).
inline Symbol mod(Symbol a, Symbol p) {
  const Symbol r = a % p;
  return r < 0 ? r + p : r;
}

Symbol pow_mod(Symbol base, std::uint64_t exponent, Symbol p);
/// Inverse of a nonzero element modulo prime p.
Symbol inv_mod(Symbol a, Symbol p);

/// min(x, p - x) for x reduced mod p.
inline Symbol lee_weight(Symbol x, Symbol p) {
  const Symbol r = mod(x, p);
  return r < p - r ? r : p - r;
}

Symbol lee_weight(std::span<const Symbol> v, Symbol p);
/// Lee weight of u - v. Throws std::invalid_argument on length mismatch.
Symbol lee_distance(std::span<const Symbol> u, std::span<const Symbol> v, Symbol p);

/// Signed representative in (-p/2, p/2].
inline Symbol signed_rep(Symbol x, Symbol p) {
  const Symbol r = mod(x, p);
  return 2 * r > p ? r - p : r;
}

Word add(std::span<const Symbol> u, std::span<const Symbol> v, Symbol p);
Word sub(std::span<const Symbol> u, std::span<const Symbol> v, Symbol p);

// --- Polynomials over Z_p, coefficients lowest degree first ---------------

using Poly = std::vector<Symbol>;

/// Drops leading zero coefficients; the zero polynomial is empty.
void trim(Poly& a);
/// Degree, with -1 for the zero polynomial.
int degree(const Poly& a);
Poly poly_sub(const Poly& a, const Poly& b, Symbol p);
Poly poly_mul(const Poly& a, const Poly& b, Symbol p);
/// Quotient and remainder; b must be nonzero.
std::pair<Poly, Poly> poly_divmod(const Poly& a, const Poly& b, Symbol p);
Symbol poly_eval(const Poly& a, Symbol x, Symbol p);
Poly poly_scale(const Poly& a, Symbol s, Symbol p);

/// Number of times (x - root) divides a; a must be nonzero.
int root_multiplicity(Poly a, Symbol root, Symbol p);

}  // namespace hmog::bkg
