#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace ctap::pulses {

/// Upper bound of every tunnelling control, in natural units.
inline constexpr double kOmegaMax = 1.0;

/// Piecewise-constant multi-channel control trace on [0, t_max].
///
/// channels[c][k] is held constant over the k-th interval [k dt, (k+1) dt). Channel order is
/// (Omega_12, Omega_23) for three dots and (Omega_left, Omega_middle, Omega_right) for five.
struct PulseSchedule {
  double t_max = 0.0;
  std::vector<std::vector<double>> channels;

  std::size_t n_channels() const { return channels.size(); }
  std::size_t n_steps() const { return channels.empty() ? 0 : channels.front().size(); }
  double dt() const { return t_max / static_cast<double>(n_steps()); }
  double t_start(std::size_t k) const { return static_cast<double>(k) * dt(); }
  double t_mid(std::size_t k) const { return (static_cast<double>(k) + 0.5) * dt(); }

  /// Control vector applied during interval k.
  std::vector<double> controls_at(std::size_t k) const;

  /// Throws ArgumentError unless t_max > 0, channels are non-empty and equally long, and every
  /// value lies in [0, kOmegaMax].
  void validate() const;

  static PulseSchedule zeros(double t_max, std::size_t n_channels, std::size_t n_steps);

  /// Builds a schedule from per-step control vectors (the layout an agent produces).
  static PulseSchedule from_steps(double t_max, const std::vector<std::vector<double>>& steps);
};

enum class PulseOrder { counter_intuitive, intuitive };

inline constexpr double kDefaultWidthFraction = 0.15;
inline constexpr double kDefaultSeparationFraction = 0.25;

/// Gaussian pulse pair Omega_max exp(-(t - t_c)^2 / 2 sigma^2) sampled at interval midpoints,
/// sigma = width_fraction * t_max, centres t_max/2 -+ separation_fraction * t_max / 2.
/// In the counter-intuitive order Omega_23 peaks first.
PulseSchedule gaussian_ctap_pair(double t_max, std::size_t n_steps,
                                 PulseOrder order = PulseOrder::counter_intuitive,
                                 double width_fraction = kDefaultWidthFraction,
                                 double separation_fraction = kDefaultSeparationFraction);

/// Straddling scheme for five dots: outer pair as in gaussian_ctap_pair (right before left) plus
/// a middle pulse centred at t_max/2 with twice the outer width and amplitude
/// min(Omega_max, middle_scale * Omega_max).
PulseSchedule gaussian_sctap(double t_max, std::size_t n_steps, double middle_scale = 1.0,
                             double width_fraction = kDefaultWidthFraction,
                             double separation_fraction = kDefaultSeparationFraction);

/// Centred moving average with a window that shrinks at the boundaries.
/// For even windows the extra sample is taken on the left: [k - w/2, k + w/2 - 1].
PulseSchedule moving_average(const PulseSchedule& schedule, std::size_t window);

/// Natural cubic spline through strictly increasing knots; linear continuation outside them.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> xs, std::vector<double> ys);

  double operator()(double x) const;

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> m_;  // second derivatives at the knots
};

/// Resamples every channel through a natural cubic spline on the interval midpoints, returning
/// n_out intervals over the same [0, t_max]; values are clipped to [0, channel peak] (so never
/// above Omega_max).
PulseSchedule spline_resample(const PulseSchedule& schedule, std::size_t n_out);

/// Mirror image in time.
PulseSchedule time_reversed(const PulseSchedule& schedule);

/// Clips every value into [0, Omega_max].
PulseSchedule clipped(PulseSchedule schedule);

/// Standalone schedule CSV: `step,t_mid,omega_1,omega_2[,omega_3]`.
void write_schedule_csv(std::ostream& out, const PulseSchedule& schedule);
PulseSchedule read_schedule_csv(std::istream& in);

}  // namespace ctap::pulses
