#include "vppnet/common.hpp"

#include <algorithm>
#include <cstdio>

namespace vppnet {

double set_sum(std::span<const double> terms) {
  std::vector<double> sorted(terms.begin(), terms.end());
  std::sort(sorted.begin(), sorted.end());
  double acc = 0.0;
  for (double t : sorted) acc += t;
  return acc;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf);
}

namespace opcount {

namespace {
thread_local std::uint64_t* g_counter = nullptr;
}

void attach(std::uint64_t* counter) { g_counter = counter; }
void detach() { g_counter = nullptr; }

void add(std::uint64_t n) {
  if (g_counter != nullptr) *g_counter += n;
}

}  // namespace opcount

}  // namespace vppnet
