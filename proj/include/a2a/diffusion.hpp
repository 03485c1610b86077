/*
 * Copyright (c) 2026, The Any2Any Authors.  All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Variance-preserving diffusion with the convention that step 0 is the clean
// state: alpha_bar[0] == 1 and steps 1..T are progressively noisier. All
// schedule arithmetic runs in double precision.

#include <cmath>
#include <vector>

#include "a2a/error.hpp"
#include "a2a/rng.hpp"
#include "a2a/tensor.hpp"

namespace a2a {

struct ScheduleParams {
    int steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct NoiseSchedule {
    ScheduleParams params;
    /// beta[s - 1] holds beta_s for s in 1..T.
    std::vector<double> beta;
    /// alpha_bar[t] for t in 0..T.
    std::vector<double> alpha_bar;

    int T() const { return params.steps; }
    double ab(int t) const
    {
        require(t >= 0 && t <= T(), "timestep " + std::to_string(t) + " outside [0, " +
                                        std::to_string(T()) + "]");
        return alpha_bar[static_cast<std::size_t>(t)];
    }
};

/// Linear beta ramp including both endpoints.
NoiseSchedule build_schedule(int T, double beta_start, double beta_end);
inline NoiseSchedule build_schedule(const ScheduleParams& p)
{
    return build_schedule(p.steps, p.beta_start, p.beta_end);
}

/// Descending step indices [T, ..., 0] split into `steps` even intervals.
std::vector<int> sampling_timesteps(int T, int steps);

namespace detail {

template <typename T>
void same_numel(const Tensor<T>& a, const Tensor<T>& b, const char* op)
{
    require(a.shape == b.shape, std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

}  // namespace detail

/// z_t = sqrt(ab_t) z0 + sqrt(1 - ab_t) eps.
template <typename T>
Tensor<T> forward_diffuse(const Tensor<T>& z0, int t, const Tensor<T>& eps, const NoiseSchedule& s)
{
    detail::same_numel(z0, eps, "forward_diffuse");
    const double ab = s.ab(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Tensor<T> out(z0.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.data[i] = static_cast<T>(a * z0.data[i] + b * eps.data[i]);
    }
    return out;
}

/// Clean latent implied by z_t and its noise.
template <typename T>
Tensor<T> x0_from_eps(const Tensor<T>& zt, const Tensor<T>& eps, int t, const NoiseSchedule& s)
{
    detail::same_numel(zt, eps, "x0_from_eps");
    require(t >= 1, "x0_from_eps: timestep must be >= 1");
    const double ab = s.ab(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Tensor<T> out(zt.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.data[i] = static_cast<T>((zt.data[i] - b * eps.data[i]) / a);
    }
    return out;
}

/// Noise implied by z_t and a clean-latent estimate.
template <typename T>
Tensor<T> eps_from_x0(const Tensor<T>& zt, const Tensor<T>& x0, int t, const NoiseSchedule& s)
{
    detail::same_numel(zt, x0, "eps_from_x0");
    require(t >= 1, "eps_from_x0: timestep must be >= 1");
    const double ab = s.ab(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Tensor<T> out(zt.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.data[i] = static_cast<T>((zt.data[i] - a * x0.data[i]) / b);
    }
    return out;
}

/// One DDIM update from t to t_prev using a predicted clean latent. With
/// eta == 0 the update is deterministic and `noise` is never read.
template <typename T>
Tensor<T> ddim_step(const Tensor<T>& zt, const Tensor<T>& x0_pred, int t, int t_prev, double eta,
                    const NoiseSchedule& s, Rng* noise)
{
    require(t_prev >= 0 && t_prev < t, "ddim_step: need 0 <= t_prev < t");
    require(eta >= 0.0, "ddim_step: eta must be non-negative");
    const Tensor<T> eps_hat = eps_from_x0(zt, x0_pred, t, s);
    const double ab_t = s.ab(t);
    const double ab_prev = s.ab(t_prev);
    const double sigma =
        eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
    const double a = std::sqrt(ab_prev);
    require(sigma == 0.0 || noise != nullptr, "ddim_step: eta > 0 needs a noise source");
    Tensor<T> out(zt.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        double v = a * x0_pred.data[i] + dir * eps_hat.data[i];
        if (sigma > 0.0) v += sigma * noise->normal();
        out.data[i] = static_cast<T>(v);
    }
    return out;
}

/// Standard-normal tensor of the given shape.
template <typename T>
Tensor<T> gaussian(const Shape& shape, Rng& rng)
{
    Tensor<T> out(shape);
    for (auto& v : out.data) v = static_cast<T>(rng.normal());
    return out;
}

}  // namespace a2a
