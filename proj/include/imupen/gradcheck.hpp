#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace imupen {

struct GradCheckOptions {
  std::size_t draws = 100;
  double step = 1e-5;
  // Denominator floor for the relative error, so gradients that are zero
  // up to rounding compare on absolute error.
  double floor = 1e-5;
  // Draws whose relu inputs or max-pool margins come closer than this to a
  // kink are replaced, since central differences straddling a kink measure
  // the jump rather than the derivative.
  double kink_margin = 1e-3;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  std::string name;
  std::size_t draws = 0;
  std::size_t entries = 0;  // coordinates compared over all draws
  double max_rel_error = 0.0;
  std::size_t redraws = 0;  // draws replaced for lying near a kink
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Largest relative error between `analytic` and central differences of `f`
/// at `x`.
double compare_gradient(const std::function<double(std::span<const double>)>& f, std::vector<double> x,
                        std::span<const double> analytic, double step, double floor);

/// Names accepted by gradcheck(): every character loss, ctc, each network
/// layer and the two assembled model heads.
std::vector<std::string> gradcheck_names();

GradCheckResult gradcheck(std::string_view name, const GradCheckOptions& opts);
std::vector<GradCheckResult> gradcheck_all(const GradCheckOptions& opts);

}  // namespace imupen
