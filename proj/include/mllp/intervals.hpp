#ifndef MLLP_INTERVALS_HPP_
#define MLLP_INTERVALS_HPP_

#include <array>
#include <string>

namespace mllp {

/// The five clinical proportion buckets.
enum class IntervalId { I0_1 = 0, I1_25, I25_50, I50_75, I75_100 };

inline constexpr int kNumIntervals = 5;

struct ProportionInterval {
  IntervalId id;
  double lower;     // exclusive (except I0_1, which also takes r = 0)
  double upper;     // inclusive
  double midpoint;  // (lower + upper) / 2, the training target
  double gamma;     // per-interval focal exponent
};

/// Bucket table. Bounds are lower-open/upper-closed; the narrow bucket
/// gets gamma = 0, all others gamma = 2.
const std::array<ProportionInterval, kNumIntervals>& interval_table();

const ProportionInterval& interval(IntervalId id);

/// Maps a proportion to its bucket. r = 0 maps to I0_1.
/// Throws std::domain_error for r outside [0,1].
IntervalId interval_of(double r);

std::string interval_name(IntervalId id);
IntervalId interval_from_name(const std::string& name);

/// Human-readable label in table column order ("0-1%", ...).
std::string interval_label(IntervalId id);

}  // namespace mllp

#endif  // MLLP_INTERVALS_HPP_
