#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>

namespace wdrt {

struct GradCheckReport {
    double max_rel_err = 0.0;
    size_t coords_checked = 0;
    size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;

    bool pass(double tolerance) const { return max_rel_err < tolerance; }
    std::string summary() const;
};

/// Central-difference check of an analytic gradient. `loss` must be a pure
/// function of the coordinates viewed through `theta`; every coordinate (or a
/// seeded random subsample of `max_coords` of them, at least 100 when
/// available) is perturbed by +-step.
GradCheckReport gradient_check(const std::function<double()>& loss,
                               std::span<double> theta,
                               std::span<const double> analytic, double step,
                               size_t max_coords, uint64_t seed);

}  // namespace wdrt
