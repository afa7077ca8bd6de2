#ifndef MLLP_LOSSES_HPP_
#define MLLP_LOSSES_HPP_

#include <string>

#include "mllp/intervals.hpp"

namespace mllp {

inline constexpr double kProportionEps = 1e-7;

/// Loss value together with its derivative w.r.t. the estimated proportion.
struct LossValue {
  double value = 0.0;
  double d_r_hat = 0.0;
};

enum class LossMode { Prop, FocalProp, WFL };

LossMode loss_mode_from_name(const std::string& name);
std::string loss_mode_name(LossMode m);

/// Two-class KL divergence KL(r || r_hat) between the true and estimated
/// proportion vectors (r, 1-r) and (r_hat, 1-r_hat). r_hat is clamped to
/// [eps, 1-eps] before logs; the derivative is taken on the clamped value.
LossValue proportion_loss(double r, double r_hat);

/// |r - r_hat|^gamma * KL(r || r_hat), with 0^0 := 1 so gamma = 0 reduces
/// exactly to proportion_loss. At r_hat = r the focal factor's derivative
/// is taken as 0 (subgradient at the minimum).
LossValue weighted_focal_proportion_loss(double r, double r_hat, double gamma);

/// Dispatches on mode: Prop uses gamma 0, FocalProp uniform gamma 2, WFL
/// the interval's own gamma schedule. r is the interval midpoint.
LossValue loss_for_interval(IntervalId id, double r_hat, LossMode mode);

/// Samples loss and gradient curves (r_hat in 0.001..0.999, step 0.001)
/// for every interval under the uniform gamma = 2 and weighted schedules.
/// Writes CSV (interval, mode, r_hat, loss, grad) and, when render_plot,
/// a PPM rendering of the curves next to it.
void plot_loss_curves(const std::string& csv_path, bool render_plot = true);

}  // namespace mllp

#endif  // MLLP_LOSSES_HPP_
