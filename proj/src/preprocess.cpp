#include "imupen/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "imupen/errors.hpp"
#include "imupen/rng.hpp"

namespace imupen {
namespace {

double sample_linear(std::span<const double> v, double x) {
  const std::size_t n = v.size();
  if (x <= 0.0) return v[0];
  if (x >= static_cast<double>(n - 1)) return v[n - 1];
  const auto i = static_cast<std::size_t>(x);
  const double frac = x - static_cast<double>(i);
  if (frac == 0.0) return v[i];
  return v[i] + frac * (v[i + 1] - v[i]);
}

double population_std(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / n);
}

std::vector<double> uniform_points(Rng& rng, int count, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> pts(static_cast<std::size_t>(count));
  for (auto& p : pts) p = dist(rng);
  return pts;
}

}  // namespace

std::vector<double> resample_linear(std::span<const double> values, std::size_t target_len) {
  if (target_len == 0) throw ArgumentError("target length must be positive");
  if (values.empty()) throw ArgumentError("cannot resample an empty channel");
  std::vector<double> out(target_len);
  const std::size_t n = values.size();
  if (target_len == 1) {
    out[0] = values[0];
    return out;
  }
  const double step = static_cast<double>(n - 1) / static_cast<double>(target_len - 1);
  for (std::size_t k = 0; k < target_len; ++k) out[k] = sample_linear(values, static_cast<double>(k) * step);
  out.back() = values.back();
  return out;
}

Sample interpolate(const Sample& sample, std::size_t target_len, LengthPolicy policy) {
  if (target_len == 0) throw ArgumentError("target length must be positive");
  if (sample.length == target_len) return sample;
  Sample out = sample;
  out.length = target_len;
  out.values.assign(target_len * sample.channels, 0.0);
  if (policy == LengthPolicy::kShrinkOrPad && sample.length < target_len) {
    std::copy(sample.values.begin(), sample.values.end(), out.values.begin());
    return out;
  }
  for (std::size_t c = 0; c < sample.channels; ++c) out.set_channel(c, resample_linear(sample.channel_values(c), target_len));
  return out;
}

std::vector<double> bezier(std::span<const double> points, std::size_t samples) {
  if (points.size() < 2) throw ArgumentError("a Bezier curve needs at least two control points");
  if (samples < 2) throw ArgumentError("Bezier evaluation needs at least two samples");
  std::vector<double> out(samples);
  std::vector<double> work(points.size());
  for (std::size_t s = 0; s < samples; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(samples - 1);
    std::copy(points.begin(), points.end(), work.begin());
    for (std::size_t level = points.size() - 1; level > 0; --level) {
      for (std::size_t i = 0; i < level; ++i) work[i] = (1.0 - t) * work[i] + t * work[i + 1];
    }
    out[s] = work[0];
  }
  out.front() = points.front();
  out.back() = points.back();
  return out;
}

std::string to_string(AugmentMethod m) {
  switch (m) {
    case AugmentMethod::kScale: return "scale";
    case AugmentMethod::kShift: return "shift";
    case AugmentMethod::kJitter: return "jitter";
    case AugmentMethod::kMagWarp: return "mag_warp";
    case AugmentMethod::kTimeWarp: return "time_warp";
  }
  return "?";
}

AugmentMethod parse_augment_method(std::string_view text) {
  for (auto m : {AugmentMethod::kScale, AugmentMethod::kShift, AugmentMethod::kJitter, AugmentMethod::kMagWarp,
                 AugmentMethod::kTimeWarp}) {
    if (text == to_string(m)) return m;
  }
  throw ArgumentError("unknown augmentation method '" + std::string(text) + "'");
}

void AugmentConfig::validate() const {
  if (!(p_apply >= 0.0 && p_apply <= 1.0)) throw ArgumentError("p_apply must lie in [0, 1]");
  if (!(mag_warp_low < mag_warp_high)) throw ArgumentError("mag_warp_low must be below mag_warp_high");
  if (bezier_control_points < 2) throw ArgumentError("bezier_control_points must be at least 2");
  if (!(warp_sigma >= 0.0 && warp_sigma < 1.0)) throw ArgumentError("warp_sigma must lie in [0, 1)");
  if (scale_sigma < 0.0 || jitter_sigma < 0.0 || shift_force < 0.0 || shift_other < 0.0)
    throw ArgumentError("augmentation magnitudes must be non-negative");
}

void to_json(nlohmann::json& j, const AugmentConfig& c) {
  j = nlohmann::json{{"p_apply", c.p_apply},
                     {"scale_sigma", c.scale_sigma},
                     {"jitter_sigma", c.jitter_sigma},
                     {"shift_force", c.shift_force},
                     {"shift_other", c.shift_other},
                     {"mag_warp_low", c.mag_warp_low},
                     {"mag_warp_high", c.mag_warp_high},
                     {"warp_sigma", c.warp_sigma},
                     {"bezier_control_points", c.bezier_control_points},
                     {"accelerometer_channels", c.accelerometer_channels},
                     {"force_channel", c.force_channel}};
}

void from_json(const nlohmann::json& j, AugmentConfig& c) {
  AugmentConfig d;
  c.p_apply = j.value("p_apply", d.p_apply);
  c.scale_sigma = j.value("scale_sigma", d.scale_sigma);
  c.jitter_sigma = j.value("jitter_sigma", d.jitter_sigma);
  c.shift_force = j.value("shift_force", d.shift_force);
  c.shift_other = j.value("shift_other", d.shift_other);
  c.mag_warp_low = j.value("mag_warp_low", d.mag_warp_low);
  c.mag_warp_high = j.value("mag_warp_high", d.mag_warp_high);
  c.warp_sigma = j.value("warp_sigma", d.warp_sigma);
  c.bezier_control_points = j.value("bezier_control_points", d.bezier_control_points);
  c.accelerometer_channels = j.value("accelerometer_channels", d.accelerometer_channels);
  c.force_channel = j.value("force_channel", d.force_channel);
}

std::vector<double> warped_time_map(std::span<const double> speed_control, std::size_t length) {
  std::vector<double> tau(length, 0.0);
  if (length < 2) return tau;
  const double last = static_cast<double>(length - 1);
  if (length == 2) {
    tau[1] = last;
    return tau;
  }
  const auto speed = bezier(speed_control, length - 1);
  for (std::size_t k = 1; k < length; ++k) tau[k] = tau[k - 1] + speed[k - 1];
  const double scale = last / tau.back();
  for (auto& x : tau) x *= scale;
  tau.back() = last;
  return tau;
}

Sample augment(const Sample& sample, const AugmentConfig& cfg, const std::set<AugmentMethod>& methods,
               std::uint64_t seed) {
  cfg.validate();
  if (cfg.force_channel >= sample.channels) throw ArgumentError("force channel index outside the sample");
  for (std::size_t c : cfg.accelerometer_channels) {
    if (c >= sample.channels) throw ArgumentError("accelerometer channel index outside the sample");
  }
  if (methods.empty()) return sample;

  Sample out = sample;
  const auto method_key = [](AugmentMethod m) { return static_cast<std::uint64_t>(m) + 1; };
  // The first draw of every stream decides whether the transform fires.
  const auto fires = [&](Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.p_apply; };

  for (AugmentMethod m : methods) {
    if (m == AugmentMethod::kTimeWarp) {
      Rng rng = make_rng(seed, {method_key(m)});
      if (!fires(rng) || out.length < 3) continue;
      const auto control =
          uniform_points(rng, cfg.bezier_control_points, 1.0 - cfg.warp_sigma, 1.0 + cfg.warp_sigma);
      const auto tau = warped_time_map(control, out.length);
      for (std::size_t c = 0; c < out.channels; ++c) {
        const auto v = out.channel_values(c);
        std::vector<double> w(out.length);
        for (std::size_t t = 0; t < out.length; ++t) w[t] = sample_linear(v, tau[t]);
        out.set_channel(c, w);
      }
      continue;
    }
    for (std::size_t c = 0; c < out.channels; ++c) {
      if (m == AugmentMethod::kMagWarp &&
          std::find(cfg.accelerometer_channels.begin(), cfg.accelerometer_channels.end(), c) ==
              cfg.accelerometer_channels.end())
        continue;
      Rng rng = make_rng(seed, {method_key(m), c});
      if (!fires(rng)) continue;
      auto v = out.channel_values(c);
      switch (m) {
        case AugmentMethod::kScale: {
          const double f = std::uniform_real_distribution<double>(1.0 - cfg.scale_sigma, 1.0 + cfg.scale_sigma)(rng);
          for (auto& x : v) x *= f;
          break;
        }
        case AugmentMethod::kShift: {
          const double a = c == cfg.force_channel ? cfg.shift_force : cfg.shift_other;
          const double d = std::uniform_real_distribution<double>(-a, a)(rng);
          for (auto& x : v) x += d;
          break;
        }
        case AugmentMethod::kJitter: {
          const double sd = cfg.jitter_sigma * population_std(v);
          if (sd == 0.0) break;
          std::normal_distribution<double> noise(0.0, sd);
          for (auto& x : v) x += noise(rng);
          break;
        }
        case AugmentMethod::kMagWarp: {
          const auto control = uniform_points(rng, cfg.bezier_control_points, cfg.mag_warp_low, cfg.mag_warp_high);
          if (v.size() < 2) {
            v[0] *= control.front();
            break;
          }
          const auto curve = bezier(control, v.size());
          for (std::size_t t = 0; t < v.size(); ++t) v[t] *= curve[t];
          break;
        }
        case AugmentMethod::kTimeWarp: break;
      }
      if (c == cfg.force_channel) {
        for (auto& x : v) x = std::max(x, 0.0);
      }
      out.set_channel(c, v);
    }
  }
  return out;
}

}  // namespace imupen
