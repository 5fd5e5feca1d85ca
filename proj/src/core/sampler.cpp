#include "core/sampler.hpp"

#include <cmath>

namespace hoigen {

namespace {

Tensor guided_x0(const DenoiseFn& model, const Tensor& x_t, int t, double s) {
    // s = 1 is exactly the conditional branch and s = 0 the unconditional one
    if (s == 1.0) return model(x_t, t, true);
    if (s == 0.0) return model(x_t, t, false);
    Tensor x0_c = model(x_t, t, true);
    Tensor x0_u = model(x_t, t, false);
    if (x0_c.shape() != x0_u.shape())
        throw SamplerError("p_sample_loop: conditional/unconditional shape mismatch");
    Tensor out = Tensor::zeros(x0_c.shape());
    for (int64_t i = 0; i < out.size(); ++i)
        out.values()[static_cast<size_t>(i)] = static_cast<float>(
            x0_u.values()[static_cast<size_t>(i)] +
            s * (x0_c.values()[static_cast<size_t>(i)] - x0_u.values()[static_cast<size_t>(i)]));
    return out;
}

void check_finite(const Tensor& t, int step) {
    if (!t.all_finite())
        throw SamplerError("p_sample_loop: non-finite value at step " + std::to_string(step));
}

std::vector<int> strided_steps(int total, int count) {
    std::vector<int> steps;
    if (count >= total) {
        for (int t = total; t >= 1; --t) steps.push_back(t);
        return steps;
    }
    for (int i = count - 1; i >= 0; --i) {
        const int t = count == 1
                          ? total
                          : 1 + static_cast<int>(std::llround(static_cast<double>(i) * (total - 1) /
                                                             (count - 1)));
        if (steps.empty() || steps.back() != t) steps.push_back(t);
    }
    return steps;
}

}  // namespace

Tensor p_sample_loop(const DenoiseFn& model, const std::vector<int>& shape,
                     const DiffusionSchedule& sched, double guidance_scale, Rng& rng,
                     int num_steps) {
    Tensor x = Tensor::randn(shape, rng);
    const bool strided = num_steps > 0 && num_steps < sched.steps;

    if (!strided) {
        for (int t = sched.steps; t >= 1; --t) {
            Tensor x0 = guided_x0(model, x, t, guidance_scale);
            if (x0.shape() != x.shape())
                throw SamplerError("p_sample_loop: model output shape " + shape_str(x0.shape()) +
                                   " does not match state " + shape_str(x.shape()));
            check_finite(x0, t);
            const double ab_t = sched.alpha_bar_at(t);
            const double ab_prev = sched.alpha_bar_at(t - 1);
            const double beta_t = sched.beta_at(t);
            const double alpha_t = sched.alpha_at(t);
            const double c0 = std::sqrt(ab_prev) * beta_t / (1.0 - ab_t);
            const double c1 = std::sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t);
            const double sigma = t > 1 ? std::sqrt((1.0 - ab_prev) / (1.0 - ab_t) * beta_t) : 0.0;
            for (int64_t i = 0; i < x.size(); ++i) {
                const double mean = c0 * x0.values()[static_cast<size_t>(i)] +
                                    c1 * x.values()[static_cast<size_t>(i)];
                const double noise = t > 1 ? sigma * rng.gaussian() : 0.0;
                x.values()[static_cast<size_t>(i)] = static_cast<float>(mean + noise);
            }
            check_finite(x, t);
        }
        return x;
    }

    // deterministic strided shortcut (eta = 0)
    const std::vector<int> steps = strided_steps(sched.steps, num_steps);
    for (size_t si = 0; si < steps.size(); ++si) {
        const int t = steps[si];
        const int t_prev = si + 1 < steps.size() ? steps[si + 1] : 0;
        Tensor x0 = guided_x0(model, x, t, guidance_scale);
        check_finite(x0, t);
        const double ab_t = sched.alpha_bar_at(t);
        const double ab_prev = sched.alpha_bar_at(t_prev);
        const double eps_scale = 1.0 / std::sqrt(1.0 - ab_t);
        for (int64_t i = 0; i < x.size(); ++i) {
            const double x0v = x0.values()[static_cast<size_t>(i)];
            const double eps = (x.values()[static_cast<size_t>(i)] - std::sqrt(ab_t) * x0v) * eps_scale;
            x.values()[static_cast<size_t>(i)] =
                static_cast<float>(std::sqrt(ab_prev) * x0v + std::sqrt(1.0 - ab_prev) * eps);
        }
        check_finite(x, t);
    }
    return x;
}

}  // namespace hoigen
