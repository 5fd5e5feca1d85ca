#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace hoigen {

/// Linear beta schedule with 64-bit tables; index i holds step t = i+1.
struct DiffusionSchedule {
    int steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    double beta_at(int t) const { return beta.at(static_cast<size_t>(t - 1)); }
    double alpha_at(int t) const { return alpha.at(static_cast<size_t>(t - 1)); }
    /// alpha_bar at step t with the t = 0 convention alpha_bar = 1.
    double alpha_bar_at(int t) const {
        return t == 0 ? 1.0 : alpha_bar.at(static_cast<size_t>(t - 1));
    }
};

class ScheduleError : public std::runtime_error {
public:
    explicit ScheduleError(const std::string& msg) : std::runtime_error(msg) {}
};

DiffusionSchedule build_schedule(int steps, double beta_min = 1e-4, double beta_max = 2e-2);

/// Forward process draw: sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
/// Plain data transform (no gradient tracking).
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const DiffusionSchedule& sched);

}  // namespace hoigen
