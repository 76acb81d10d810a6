#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "imupen/dataio.hpp"
#include "json.hpp"

namespace imupen {

enum class LengthPolicy {
  // Longer samples are linearly resampled down; shorter ones keep their rows
  // and are zero-padded at the end.
  kShrinkOrPad,
  // Every sample is linearly resampled to the target length.
  kResample,
};

/// Linear resampling of one channel onto `target_len` equidistant points
/// spanning [0, n-1]. Endpoints are reproduced exactly.
std::vector<double> resample_linear(std::span<const double> values, std::size_t target_len);

Sample interpolate(const Sample& sample, std::size_t target_len,
                   LengthPolicy policy = LengthPolicy::kShrinkOrPad);

/// Evaluates the Bezier curve with scalar control values `points` at
/// `samples` equidistant parameters in [0, 1] (de Casteljau).
std::vector<double> bezier(std::span<const double> points, std::size_t samples);

enum class AugmentMethod { kScale, kShift, kJitter, kMagWarp, kTimeWarp };

std::string to_string(AugmentMethod m);
AugmentMethod parse_augment_method(std::string_view text);

struct AugmentConfig {
  double p_apply = 0.5;
  double scale_sigma = 0.1;
  double jitter_sigma = 0.1;
  double shift_force = 200.0;
  double shift_other = 20.0;
  double mag_warp_low = 0.7;
  double mag_warp_high = 1.3;
  double warp_sigma = 0.1;
  int bezier_control_points = 10;
  std::vector<std::size_t> accelerometer_channels{0, 1, 2, 3, 4, 5};
  std::size_t force_channel = channel::kForce;

  void validate() const;
};

void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);

/// Applies each enabled method, in enum order, to a copy of `sample`. Scale,
/// shift, jitter and magnitude warping are decided per channel; time warping
/// is decided once and moves all channels together. Randomness comes only
/// from `seed`, split into one stream per (method, channel).
Sample augment(const Sample& sample, const AugmentConfig& cfg, const std::set<AugmentMethod>& methods,
               std::uint64_t seed);

/// Strictly increasing time map of `length` points from 0 to length-1 built
/// from cumulative Bezier speed multipliers. Exposed for testing.
std::vector<double> warped_time_map(std::span<const double> speed_control, std::size_t length);

}  // namespace imupen
