#include "hmog/bkg/field.hpp"

#include <stdexcept>

namespace hmog::bkg {

bool is_prime(Symbol p) {
  if (p < 2) return false;
  for (Symbol d = 2; d * d <= p; ++d) {
    if (p % d == 0) return false;
  }
  return true;
}

Symbol pow_mod(Symbol base, std::uint64_t exponent, Symbol p) {
  Symbol result = 1 % p;
  Symbol b = mod(base, p);
  while (exponent > 0) {
    if (exponent & 1U) result = result * b % p;
    b = b * b % p;
    exponent >>= 1U;
  }
  return result;
}

Symbol inv_mod(Symbol a, Symbol p) {
  const Symbol r = mod(a, p);
  if (r == 0) throw std::domain_error("inv_mod: zero has no inverse");
  return pow_mod(r, std::uint64_t(p - 2), p);
}

Symbol lee_weight(std::span<const Symbol> v, Symbol p) {
  Symbol w = 0;
  for (Symbol x : v) w += lee_weight(x, p);
  return w;
}

Symbol lee_distance(std::span<const Symbol> u, std::span<const Symbol> v, Symbol p) {
  if (u.size() != v.size()) throw std::invalid_argument("lee_distance: length mismatch");
  Symbol d = 0;
  for (std::size_t i = 0; i < u.size(); ++i) d += lee_weight(u[i] - v[i], p);
  return d;
}

Word add(std::span<const Symbol> u, std::span<const Symbol> v, Symbol p) {
  if (u.size() != v.size()) throw std::invalid_argument("add: length mismatch");
  Word out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = mod(u[i] + v[i], p);
  return out;
}

Word sub(std::span<const Symbol> u, std::span<const Symbol> v, Symbol p) {
  if (u.size() != v.size()) throw std::invalid_argument("sub: length mismatch");
  Word out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = mod(u[i] - v[i], p);
  return out;
}

void trim(Poly& a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
}

int degree(const Poly& a) {
  for (std::size_t i = a.size(); i-- > 0;) {
    if (a[i] != 0) return int(i);
  }
  return -1;
}

Poly poly_sub(const Poly& a, const Poly& b, Symbol p) {
  Poly out(std::max(a.size(), b.size()), 0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] = mod(out[i] - b[i], p);
  trim(out);
  return out;
}

Poly poly_mul(const Poly& a, const Poly& b, Symbol p) {
  if (a.empty() || b.empty()) return {};
  Poly out(a.size() + b.size() - 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] = (out[i + j] + a[i] * b[j]) % p;
  }
  trim(out);
  return out;
}

std::pair<Poly, Poly> poly_divmod(const Poly& a, const Poly& b, Symbol p) {
  const int db = degree(b);
  if (db < 0) throw std::domain_error("poly_divmod: division by zero polynomial");
  Poly rem = a;
  trim(rem);
  const int da = degree(rem);
  if (da < db) return {{}, rem};
  Poly quot(std::size_t(da - db + 1), 0);
  const Symbol lead_inv = inv_mod(b[std::size_t(db)], p);
  for (int k = da - db; k >= 0; --k) {
    const Symbol coef = rem.size() > std::size_t(k + db) ? rem[std::size_t(k + db)] : 0;
    if (coef == 0) continue;
    const Symbol q = coef * lead_inv % p;
    quot[std::size_t(k)] = q;
    for (int j = 0; j <= db; ++j) {
      auto& r = rem[std::size_t(k + j)];
      r = mod(r - q * b[std::size_t(j)], p);
    }
  }
  trim(quot);
  trim(rem);
  return {quot, rem};
}

Symbol poly_eval(const Poly& a, Symbol x, Symbol p) {
  Symbol acc = 0;
  const Symbol xr = mod(x, p);
  for (std::size_t i = a.size(); i-- > 0;) acc = (acc * xr + a[i]) % p;
  return acc;
}

Poly poly_scale(const Poly& a, Symbol s, Symbol p) {
  Poly out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = mod(a[i] * s, p);
  trim(out);
  return out;
}

int root_multiplicity(Poly a, Symbol root, Symbol p) {
  trim(a);
  if (a.empty()) throw std::domain_error("root_multiplicity: zero polynomial");
  const Poly factor{mod(-root, p), 1};
  int m = 0;
  while (degree(a) >= 1 && poly_eval(a, root, p) == 0) {
    a = poly_divmod(a, factor, p).first;
    ++m;
  }
  return m;
}

}  // namespace hmog::bkg
