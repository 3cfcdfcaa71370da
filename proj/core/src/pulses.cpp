#include "ctap/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ctap/errors.hpp"

namespace ctap::pulses {

std::vector<double> PulseSchedule::controls_at(std::size_t k) const {
  std::vector<double> out(n_channels());
  for (std::size_t c = 0; c < n_channels(); ++c) out[c] = channels[c].at(k);
  return out;
}

void PulseSchedule::validate() const {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ArgumentError("PulseSchedule: t_max must be positive");
  if (channels.empty() || channels.front().empty()) throw ArgumentError("PulseSchedule: no samples");
  for (const auto& ch : channels) {
    if (ch.size() != channels.front().size()) throw ArgumentError("PulseSchedule: channels differ in length");
    for (double v : ch)
      if (!(v >= 0.0 && v <= kOmegaMax)) throw ArgumentError(fmt::format("PulseSchedule: value {} outside [0, Omega_max]", v));
  }
}

PulseSchedule PulseSchedule::zeros(double t_max, std::size_t n_channels, std::size_t n_steps) {
  return {t_max, std::vector<std::vector<double>>(n_channels, std::vector<double>(n_steps, 0.0))};
}

PulseSchedule PulseSchedule::from_steps(double t_max, const std::vector<std::vector<double>>& steps) {
  if (steps.empty()) throw ArgumentError("PulseSchedule::from_steps: no steps");
  PulseSchedule s = zeros(t_max, steps.front().size(), steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (steps[k].size() != s.n_channels()) throw ArgumentError("PulseSchedule::from_steps: ragged control vectors");
    for (std::size_t c = 0; c < s.n_channels(); ++c) s.channels[c][k] = steps[k][c];
  }
  return s;
}

namespace {

double clip(double v) { return std::clamp(v, 0.0, kOmegaMax); }

std::vector<double> gaussian_samples(double t_max, std::size_t n_steps, double centre, double sigma,
                                     double amplitude) {
  std::vector<double> out(n_steps);
  const double dt = t_max / static_cast<double>(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt;
    const double x = (t - centre) / sigma;
    out[k] = clip(amplitude * std::exp(-0.5 * x * x));
  }
  return out;
}

void check_shape_args(double t_max, std::size_t n_steps, double width_fraction, double separation_fraction) {
  if (!(t_max > 0.0)) throw ArgumentError("pulse: t_max must be positive");
  if (n_steps == 0) throw ArgumentError("pulse: n_steps must be positive");
  if (!(width_fraction > 0.0)) throw ArgumentError("pulse: width_fraction must be positive");
  if (!(separation_fraction > 0.0 && separation_fraction < 1.0))
    throw ArgumentError("pulse: separation_fraction must lie in (0, 1)");
}

}  // namespace

PulseSchedule gaussian_ctap_pair(double t_max, std::size_t n_steps, PulseOrder order, double width_fraction,
                                 double separation_fraction) {
  check_shape_args(t_max, n_steps, width_fraction, separation_fraction);
  const double sigma = width_fraction * t_max;
  const double early = 0.5 * t_max - 0.5 * separation_fraction * t_max;
  const double late = 0.5 * t_max + 0.5 * separation_fraction * t_max;
  const bool counter = order == PulseOrder::counter_intuitive;
  PulseSchedule s{t_max, {}};
  s.channels.push_back(gaussian_samples(t_max, n_steps, counter ? late : early, sigma, kOmegaMax));  // Omega_12
  s.channels.push_back(gaussian_samples(t_max, n_steps, counter ? early : late, sigma, kOmegaMax));  // Omega_23
  return s;
}

PulseSchedule gaussian_sctap(double t_max, std::size_t n_steps, double middle_scale, double width_fraction,
                             double separation_fraction) {
  check_shape_args(t_max, n_steps, width_fraction, separation_fraction);
  if (!(middle_scale >= 1.0)) throw ArgumentError("gaussian_sctap: middle_scale must be >= 1");
  const double sigma = width_fraction * t_max;
  const double early = 0.5 * t_max - 0.5 * separation_fraction * t_max;
  const double late = 0.5 * t_max + 0.5 * separation_fraction * t_max;
  const double middle_amplitude = std::min(kOmegaMax, middle_scale * kOmegaMax);
  PulseSchedule s{t_max, {}};
  s.channels.push_back(gaussian_samples(t_max, n_steps, late, sigma, kOmegaMax));                       // left
  s.channels.push_back(gaussian_samples(t_max, n_steps, 0.5 * t_max, 2.0 * sigma, middle_amplitude));  // middle
  s.channels.push_back(gaussian_samples(t_max, n_steps, early, sigma, kOmegaMax));                      // right
  return s;
}

PulseSchedule moving_average(const PulseSchedule& schedule, std::size_t window) {
  const std::size_t n = schedule.n_steps();
  if (window < 1 || window > n) throw ArgumentError(fmt::format("moving_average: window {} outside [1, {}]", window, n));
  PulseSchedule out = schedule;
  if (window == 1) return out;
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>(window / 2);
  const std::ptrdiff_t right = static_cast<std::ptrdiff_t>(window) - 1 - left;
  for (std::size_t c = 0; c < schedule.n_channels(); ++c) {
    const auto& in = schedule.channels[c];
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - left);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, k + right);
      double sum = 0.0;
      for (std::ptrdiff_t j = lo; j <= hi; ++j) sum += in[static_cast<std::size_t>(j)];
      out.channels[c][static_cast<std::size_t>(k)] = clip(sum / static_cast<double>(hi - lo + 1));
    }
  }
  return out;
}

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)), m_(xs_.size(), 0.0) {
  const std::size_t n = xs_.size();
  if (n < 2 || ys_.size() != n) throw ArgumentError("NaturalCubicSpline: need at least two (x, y) pairs");
  for (std::size_t i = 1; i < n; ++i)
    if (!(xs_[i] > xs_[i - 1])) throw ArgumentError("NaturalCubicSpline: knots must be strictly increasing");
  if (n == 2) return;

  // Tridiagonal system for interior second derivatives (Thomas algorithm), m_0 = m_{n-1} = 0.
  const std::size_t k = n - 2;
  std::vector<double> diag(k), upper(k), rhs(k);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = xs_[i] - xs_[i - 1];
    const double h1 = xs_[i + 1] - xs_[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs[i - 1] = 6.0 * ((ys_[i + 1] - ys_[i]) / h1 - (ys_[i] - ys_[i - 1]) / h0);
  }
  for (std::size_t i = 1; i < k; ++i) {
    const double lower = xs_[i + 1] - xs_[i];  // h_{i} couples unknown i to i-1
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m_[k] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i >= 1; --i) m_[i] = (rhs[i - 1] - upper[i - 1] * m_[i + 1]) / diag[i - 1];
}

double NaturalCubicSpline::operator()(double x) const {
  const std::size_t n = xs_.size();
  if (x <= xs_.front()) {
    const double h = xs_[1] - xs_[0];
    const double slope = (ys_[1] - ys_[0]) / h - h * m_[1] / 6.0;
    return ys_[0] + slope * (x - xs_[0]);
  }
  if (x >= xs_.back()) {
    const double h = xs_[n - 1] - xs_[n - 2];
    const double slope = (ys_[n - 1] - ys_[n - 2]) / h + h * m_[n - 2] / 6.0;
    return ys_[n - 1] + slope * (x - xs_[n - 1]);
  }
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin()) - 1;
  const double h = xs_[i + 1] - xs_[i];
  const double a = (xs_[i + 1] - x) / h;
  const double b = (x - xs_[i]) / h;
  return a * ys_[i] + b * ys_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

PulseSchedule spline_resample(const PulseSchedule& schedule, std::size_t n_out) {
  const std::size_t n = schedule.n_steps();
  if (n < 4) throw ArgumentError("spline_resample: need at least 4 knots");
  if (n_out < n) throw ArgumentError("spline_resample: n_out must be >= n_steps");
  std::vector<double> knots(n);
  for (std::size_t k = 0; k < n; ++k) knots[k] = schedule.t_mid(k);

  PulseSchedule out = PulseSchedule::zeros(schedule.t_max, schedule.n_channels(), n_out);
  for (std::size_t c = 0; c < schedule.n_channels(); ++c) {
    const NaturalCubicSpline spline(knots, schedule.channels[c]);
    // Overshoot is cut at the channel's own peak so that smoothing never raises the maximum.
    const double peak = clip(*std::max_element(schedule.channels[c].begin(), schedule.channels[c].end()));
    for (std::size_t k = 0; k < n_out; ++k) {
      // Same-size resampling must hit the knots bit for bit.
      out.channels[c][k] = n_out == n ? schedule.channels[c][k] : std::clamp(spline(out.t_mid(k)), 0.0, peak);
    }
  }
  return out;
}

PulseSchedule time_reversed(const PulseSchedule& schedule) {
  PulseSchedule out = schedule;
  for (auto& ch : out.channels) std::reverse(ch.begin(), ch.end());
  return out;
}

PulseSchedule clipped(PulseSchedule schedule) {
  for (auto& ch : schedule.channels)
    for (double& v : ch) v = clip(v);
  return schedule;
}

void write_schedule_csv(std::ostream& out, const PulseSchedule& schedule) {
  out << "step,t_mid";
  for (std::size_t c = 0; c < schedule.n_channels(); ++c) out << ",omega_" << c + 1;
  out << '\n';
  for (std::size_t k = 0; k < schedule.n_steps(); ++k) {
    out << k << ',' << fmt::format("{:.17g}", schedule.t_mid(k));
    for (std::size_t c = 0; c < schedule.n_channels(); ++c) out << ',' << fmt::format("{:.17g}", schedule.channels[c][k]);
    out << '\n';
  }
}

PulseSchedule read_schedule_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,t_mid", 0) != 0) throw ArgumentError("schedule CSV: missing header");
  const std::size_t n_channels = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 1;
  std::vector<std::vector<double>> steps;
  double first_mid = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != n_channels + 2) throw ArgumentError("schedule CSV: wrong column count");
    if (steps.empty()) first_mid = row[1];
    steps.emplace_back(row.begin() + 2, row.end());
  }
  PulseSchedule s = PulseSchedule::from_steps(2.0 * first_mid * static_cast<double>(steps.size()), steps);
  s.validate();
  return s;
}

}  // namespace ctap::pulses
