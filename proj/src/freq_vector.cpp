#include "distmon/freq_vector.hpp"

#include <cmath>
#include <limits>

namespace distmon {

double wide_to_double(Wide x) {
  const uint64_t lo = static_cast<uint64_t>(x);
  const uint64_t hi = static_cast<uint64_t>(x >> 64);
  return std::ldexp(static_cast<double>(hi), 64) + static_cast<double>(lo);
}

Wide pow_wide(Count v, int p) {
  if (p < 0) throw std::invalid_argument("pow_wide: negative exponent");
  Wide acc = 1;
  const Wide limit = ~Wide(0);
  for (int i = 0; i < p; ++i) {
    if (v != 0 && acc > limit / v)
      throw std::overflow_error("pow_wide: exact accumulator overflow");
    acc *= v;
  }
  return acc;
}

Moments moments(const FrequencyVector& x, int p) {
  if (p < 1) throw std::invalid_argument("moments: p must be >= 1");
  Wide fp = 0;
  for (auto [j, c] : x.entries()) {
    Wide term = pow_wide(c, p);
    if (fp > ~Wide(0) - term)
      throw std::overflow_error("moments: exact accumulator overflow");
    fp += term;
  }
  double lp = std::pow(wide_to_double(fp), 1.0 / p);
  return {fp, lp};
}

MomentSummary partition_moments(const PartitionedInput& inp, int p) {
  if (p < 2) throw std::invalid_argument("partition_moments: p must be >= 2");
  Wide fp_prime = 0;
  for (const auto& loc : inp.locals) fp_prime += moments(loc, p).fp;
  Moments global = moments(inp.global(), p);
  return {p, global.fp, fp_prime, global.lp,
          std::pow(wide_to_double(fp_prime), 1.0 / p)};
}

FrequencyVector sparsify(const FrequencyVector& x, double threshold) {
  if (threshold < 0) throw std::invalid_argument("sparsify: threshold < 0");
  FrequencyVector out;
  for (auto [j, c] : x.entries())
    if (static_cast<double>(c) >= threshold) out.add(j, c);
  return out;
}

FrequencyVector sparsify_shifted(const FrequencyVector& x, double threshold) {
  if (threshold < 0)
    throw std::invalid_argument("sparsify_shifted: threshold < 0");
  const Count shift = static_cast<Count>(std::ceil(threshold));
  FrequencyVector out;
  for (auto [j, c] : x.entries()) {
    if (static_cast<double>(c) < threshold) continue;
    if (c > shift) out.add(j, c - shift);
  }
  return out;
}

}  // namespace distmon
