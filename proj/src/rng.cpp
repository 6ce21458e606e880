#include "brw/rng.hpp"

#include <cmath>

#include "brw/error.hpp"

namespace brw {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::not_normalized: return "NotNormalized";
    case ErrorKind::not_critical: return "NotCritical";
    case ErrorKind::degenerate_variance: return "DegenerateVariance";
    case ErrorKind::retry_budget_exceeded: return "RetryBudgetExceeded";
    case ErrorKind::missing_labels: return "MissingLabels";
    case ErrorKind::not_psd: return "NotPSD";
    case ErrorKind::invalid_mu: return "InvalidMu";
    case ErrorKind::size_mismatch: return "SizeMismatch";
    case ErrorKind::cap_exceeded: return "CapExceeded";
    case ErrorKind::negative_sample: return "NegativeSample";
    case ErrorKind::config: return "ConfigError";
  }
  return "Error";
}

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline PhiloxCounter philox_round(const PhiloxCounter& c, const PhiloxKey& k) {
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, c[0], hi0, lo0);
  mulhilo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline std::uint64_t join(std::uint32_t lo, std::uint32_t hi) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
  ctr = philox_round(ctr, key);
  for (int r = 1; r < 10; ++r) {
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
    ctr = philox_round(ctr, key);
  }
  return ctr;
}

std::uint64_t stream_label(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Stream::Stream(std::uint64_t master_seed, std::uint64_t label, std::uint64_t index) noexcept {
  const PhiloxKey key{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32)};
  const PhiloxCounter ctr{static_cast<std::uint32_t>(label), static_cast<std::uint32_t>(label >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  const PhiloxCounter a = philox4x32_10(ctr, key);
  const PhiloxCounter b = philox4x32_10(a, key);
  s_ = {join(a[0], a[1]), join(a[2], a[3]), join(b[0], b[1]), join(b[2], b[3])};
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9E3779B97F4A7C15ull;
}

std::uint64_t Stream::below(std::uint64_t bound) noexcept {
  // Lemire's multiply-shift with rejection of the biased low region.
  std::uint64_t x = (*this)();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = (*this)();
      m = static_cast<unsigned __int128>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Stream::exponential(double rate) noexcept {
  return -std::log1p(-uniform()) / rate;
}

double Stream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

}  // namespace brw
