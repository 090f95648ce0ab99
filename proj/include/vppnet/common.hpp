#ifndef VPPNET_COMMON_HPP
#define VPPNET_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vppnet {

inline constexpr const char* kVersion = "0.1.0";

/// Raised when vector/matrix shapes do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a problem instance (or equality system) has no solution,
/// or no strictly interior point where one is required.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on non-finite intermediates, failed convergence, or other
/// numeric breakdown.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the reference solution has zero norm and the relative
/// optimality gap is undefined.
class UndefinedGapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on malformed configuration input; carries the offending field name.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Deterministic random stream. Wraps mt19937_64 but converts to doubles
/// and bounded integers explicitly, so the byte stream of anything derived
/// from a seed does not depend on the standard library's distribution
/// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive. Rejection sampled, no modulo bias.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<int>(x % span);
  }

  /// Standard normal via Box-Muller (deterministic, no cached spare).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)],
                v[static_cast<std::size_t>(uniform_int(0, i))]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

/// Sum that is bitwise independent of the input order: terms are sorted by
/// value before accumulation, so any two orderings of the same multiset give
/// an identical result. Used wherever a per-agent sum must be exactly
/// permutation-invariant.
double set_sum(std::span<const double> terms);

/// FNV-1a 64-bit hash; used for config digests in output file headers.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

/// Arithmetic-operation accounting for the inference path. When a counter is
/// attached (thread-local), the model/gauge kernels add their op counts as
/// they execute; loop trip counts depend only on the instance size, so the
/// recorded total is a structural property of the computation.
namespace opcount {

void attach(std::uint64_t* counter);
void detach();

void add(std::uint64_t n);

/// RAII attach/detach for a counting scope.
class Scope {
 public:
  explicit Scope(std::uint64_t* counter) { attach(counter); }
  ~Scope() { detach(); }
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;
};

}  // namespace opcount

}  // namespace vppnet

#endif  // VPPNET_COMMON_HPP
