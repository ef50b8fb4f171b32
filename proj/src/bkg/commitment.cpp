#include "hmog/bkg/commitment.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <array>
#include <sstream>
#include <stdexcept>

#include "hmog/csv.hpp"
#include "hmog/error.hpp"

namespace hmog::bkg {

Digest prf(std::span<const Symbol> codeword, std::string_view z, std::uint8_t domain) {
  std::vector<std::uint8_t> key;
  key.reserve(codeword.size() * 2);
  for (Symbol c : codeword) {
    if (c < 0 || c > 0xFFFF) throw std::invalid_argument("prf: symbol out of 16-bit range");
    key.push_back(std::uint8_t((c >> 8) & 0xFF));
    key.push_back(std::uint8_t(c & 0xFF));
  }
  std::vector<std::uint8_t> message(z.begin(), z.end());
  message.push_back(domain);

  Digest out{};
  unsigned int len = 0;
  const auto* ok = HMAC(EVP_sha256(), key.data(), int(key.size()), message.data(),
                        message.size(), out.data(), &len);
  if (ok == nullptr || len != out.size()) throw std::runtime_error("prf: HMAC failed");
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0F]);
  }
  return out;
}

std::optional<Digest> digest_from_hex(std::string_view hex) {
  if (hex.size() != 64) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  Digest out{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[i] = std::uint8_t(hi * 16 + lo);
  }
  return out;
}

Symbol uniform_below(std::mt19937_64& rng, Symbol bound) {
  const auto b = std::uint64_t(bound);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % b;
  std::uint64_t v = 0;
  do {
    v = rng();
  } while (v >= limit);
  return Symbol(v % b);
}

CommitResult commit(std::span<const Symbol> x, std::string_view z, const GrsCode& code,
                    std::mt19937_64& rng) {
  if (x.size() != code.n()) {
    throw std::invalid_argument("commit: vector of length " + std::to_string(x.size()) +
                                ", code length " + std::to_string(code.n()));
  }
  Word m(code.l());
  for (auto& v : m) v = uniform_below(rng, code.p());
  const Word c = code.encode(m);

  CommitResult out;
  out.commitment.p = code.p();
  out.commitment.n = code.n();
  out.commitment.l = code.l();
  out.commitment.delta = sub(x, c, code.p());
  out.commitment.tag = prf(c, z, kTagDomain);
  out.key = prf(c, z, kKeyDomain);
  return out;
}

std::optional<Digest> open(std::span<const Symbol> y, const Commitment& commitment,
                           std::string_view z, const GrsCode& code) {
  if (y.size() != code.n() || commitment.delta.size() != code.n()) {
    throw std::invalid_argument("open: length mismatch");
  }
  const auto c = code.decode(sub(y, commitment.delta, code.p()));
  if (!c) return std::nullopt;
  const Digest tag = prf(*c, z, kTagDomain);
  if (CRYPTO_memcmp(tag.data(), commitment.tag.data(), tag.size()) != 0) return std::nullopt;
  return prf(*c, z, kKeyDomain);
}

namespace {

template <typename T>
void write_list(std::ostream& out, const char* name, const std::vector<T>& values) {
  out << name;
  for (const auto& v : values) {
    if constexpr (std::is_floating_point_v<T>) {
      out << ' ' << format_double(v);
    } else {
      out << ' ' << v;
    }
  }
  out << '\n';
}

}  // namespace

void write_commitments(std::ostream& out, std::span<const Commitment> commitments) {
  for (const auto& c : commitments) {
    out << "hmog-commitment 1\n";
    out << "user " << c.user_id << '\n';
    out << "p " << c.p << '\n';
    out << "n " << c.n << '\n';
    out << "l " << c.l << '\n';
    write_list(out, "d_range", c.spec.d_range);
    write_list(out, "min", c.spec.min);
    write_list(out, "max", c.spec.max);
    write_list(out, "fill", c.spec.fill);
    write_list(out, "delta", c.delta);
    out << "tag " << to_hex(c.tag) << "\n\n";
  }
}

std::vector<Commitment> read_commitments(std::istream& in) {
  std::vector<Commitment> out;
  std::string line;
  std::size_t line_no = 0;
  Commitment* current = nullptr;
  // Fields seen per record, in file order of kFields.
  static constexpr std::array<std::string_view, 10> kFields = {
      "user", "p", "n", "l", "d_range", "min", "max", "fill", "delta", "tag"};
  std::vector<std::uint32_t> seen;
  auto fail = [&](const std::string& what) {
    return data_error("commitment file line " + std::to_string(line_no) + ": " + what);
  };
  auto numbers = [&](std::istringstream& s, auto& dest) {
    using T = typename std::decay_t<decltype(dest)>::value_type;
    std::string tok;
    while (s >> tok) {
      if constexpr (std::is_floating_point_v<T>) {
        dest.push_back(std::stod(tok));
      } else {
        dest.push_back(T(std::stoll(tok)));
      }
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream s(line);
    std::string field;
    s >> field;
    try {
      if (field == "hmog-commitment") {
        int version = 0;
        s >> version;
        if (version != 1) throw fail("unsupported version");
        out.emplace_back();
        current = &out.back();
        seen.push_back(0);
        continue;
      }
      if (current == nullptr) throw fail("record does not start with a header");
      const auto known = std::find(kFields.begin(), kFields.end(), field);
      if (known != kFields.end()) {
        const auto bit = std::uint32_t(1) << (known - kFields.begin());
        if (seen.back() & bit) throw fail("duplicate field '" + field + "'");
        seen.back() |= bit;
      }
      if (field == "user") {
        s >> current->user_id;
      } else if (field == "p") {
        s >> current->p;
        current->spec.p = current->p;
      } else if (field == "n") {
        s >> current->n;
      } else if (field == "l") {
        s >> current->l;
      } else if (field == "d_range") {
        numbers(s, current->spec.d_range);
      } else if (field == "min") {
        numbers(s, current->spec.min);
      } else if (field == "max") {
        numbers(s, current->spec.max);
      } else if (field == "fill") {
        numbers(s, current->spec.fill);
      } else if (field == "delta") {
        numbers(s, current->delta);
      } else if (field == "tag") {
        std::string hex;
        s >> hex;
        const auto tag = digest_from_hex(hex);
        if (!tag) throw fail("malformed tag");
        current->tag = *tag;
      } else {
        throw fail("unknown field '" + field + "'");
      }
    } catch (const std::logic_error&) {
      throw fail("malformed number");
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& c = out[k];
    if (seen[k] != (std::uint32_t(1) << kFields.size()) - 1) {
      throw data_error("commitment file: record " + std::to_string(k + 1) + " is incomplete");
    }
    if (!is_prime(c.p) || c.p < 3 || c.l == 0 || c.l >= c.n) {
      throw data_error("commitment file: record for '" + c.user_id + "' has invalid code parameters");
    }
    if (c.delta.size() != c.n || c.spec.size() != c.n || c.spec.min.size() != c.n ||
        c.spec.max.size() != c.n) {
      throw data_error("commitment file: record for '" + c.user_id + "' has inconsistent lengths");
    }
  }
  return out;
}

}  // namespace hmog::bkg
