#include "core/schedule.hpp"

#include <cmath>

namespace hoigen {

DiffusionSchedule build_schedule(int steps, double beta_min, double beta_max) {
    if (steps < 1) throw ScheduleError("build_schedule: steps must be >= 1");
    if (beta_min <= 0.0 || beta_max >= 1.0 || beta_min > beta_max)
        throw ScheduleError("build_schedule: betas must satisfy 0 < beta_min <= beta_max < 1");
    DiffusionSchedule s;
    s.steps = steps;
    s.beta.resize(static_cast<size_t>(steps));
    s.alpha.resize(static_cast<size_t>(steps));
    s.alpha_bar.resize(static_cast<size_t>(steps));
    double prod = 1.0;
    for (int t = 1; t <= steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
        const double b = beta_min + frac * (beta_max - beta_min);
        s.beta[static_cast<size_t>(t - 1)] = b;
        s.alpha[static_cast<size_t>(t - 1)] = 1.0 - b;
        prod *= 1.0 - b;
        s.alpha_bar[static_cast<size_t>(t - 1)] = prod;
    }
    return s;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.steps)
        throw ScheduleError("q_sample: step " + std::to_string(t) + " out of range [1, " +
                            std::to_string(sched.steps) + "]");
    if (x0.shape() != eps.shape())
        throw ScheduleError("q_sample: noise shape " + shape_str(eps.shape()) +
                            " does not match x0 " + shape_str(x0.shape()));
    const double ab = sched.alpha_bar_at(t);
    const double c0 = std::sqrt(ab), c1 = std::sqrt(1.0 - ab);
    Tensor out = Tensor::zeros(x0.shape());
    for (int64_t i = 0; i < x0.size(); ++i)
        out.values()[static_cast<size_t>(i)] = static_cast<float>(
            c0 * x0.values()[static_cast<size_t>(i)] + c1 * eps.values()[static_cast<size_t>(i)]);
    return out;
}

}  // namespace hoigen
