#include "mllp/intervals.hpp"

#include <stdexcept>

namespace mllp {

const std::array<ProportionInterval, kNumIntervals>& interval_table() {
  static const std::array<ProportionInterval, kNumIntervals> table = {{
      {IntervalId::I0_1, 0.00, 0.01, 0.005, 0.0},
      {IntervalId::I1_25, 0.01, 0.25, 0.13, 2.0},
      {IntervalId::I25_50, 0.25, 0.50, 0.375, 2.0},
      {IntervalId::I50_75, 0.50, 0.75, 0.625, 2.0},
      {IntervalId::I75_100, 0.75, 1.00, 0.875, 2.0},
  }};
  return table;
}

const ProportionInterval& interval(IntervalId id) {
  return interval_table()[static_cast<int>(id)];
}

IntervalId interval_of(double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::domain_error("interval_of: r outside [0,1]");
  for (const auto& b : interval_table())
    if (r <= b.upper) return b.id;  // buckets are (lower, upper]; r = 0 falls into I0_1
  return IntervalId::I75_100;  // r == 1.0, unreachable via loop only through rounding
}

std::string interval_name(IntervalId id) {
  switch (id) {
    case IntervalId::I0_1: return "I0_1";
    case IntervalId::I1_25: return "I1_25";
    case IntervalId::I25_50: return "I25_50";
    case IntervalId::I50_75: return "I50_75";
    case IntervalId::I75_100: return "I75_100";
  }
  throw std::logic_error("interval_name: bad id");
}

IntervalId interval_from_name(const std::string& name) {
  for (const auto& b : interval_table())
    if (interval_name(b.id) == name) return b.id;
  throw std::runtime_error("unknown interval name: " + name);
}

std::string interval_label(IntervalId id) {
  switch (id) {
    case IntervalId::I0_1: return "0-1%";
    case IntervalId::I1_25: return "1-25%";
    case IntervalId::I25_50: return "25-50%";
    case IntervalId::I50_75: return "50-75%";
    case IntervalId::I75_100: return "75-100%";
  }
  throw std::logic_error("interval_label: bad id");
}

}  // namespace mllp
