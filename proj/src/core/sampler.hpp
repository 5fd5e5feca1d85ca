#pragma once

#include <functional>

#include "core/rng.hpp"
#include "core/schedule.hpp"

namespace hoigen {

struct GuidanceConfig {
    double scale = 2.0;        // classifier-free guidance on the x0 prediction
    double cond_dropout = 0.1; // training-time probability of the null condition
};

class SamplerError : public std::runtime_error {
public:
    explicit SamplerError(const std::string& msg) : std::runtime_error(msg) {}
};

/// x0-predicting denoiser callback: (x_t, t, conditional) -> x0_hat of x_t's
/// shape. `conditional` false selects the null-condition branch.
using DenoiseFn = std::function<Tensor(const Tensor&, int, bool)>;

/// DDPM reverse loop in the x0 parameterization. The guided prediction is
/// x0_u + s * (x0_c - x0_u); x_{t-1} draws from the posterior
/// q(x_{t-1} | x_t, x0_hat) with variance beta_tilde, noiseless at t = 1.
///
/// `num_steps` < sched.steps runs a strided deterministic (DDIM-style)
/// shortcut over an evenly spaced step subset instead.
Tensor p_sample_loop(const DenoiseFn& model, const std::vector<int>& shape,
                     const DiffusionSchedule& sched, double guidance_scale, Rng& rng,
                     int num_steps = 0);

}  // namespace hoigen
