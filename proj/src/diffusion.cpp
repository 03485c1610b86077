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

#include "a2a/diffusion.hpp"

namespace a2a {

NoiseSchedule build_schedule(int T, double beta_start, double beta_end)
{
    require(T >= 1, "schedule needs at least one step");
    require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
            "schedule bounds must satisfy 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.params = {T, beta_start, beta_end};
    s.beta.resize(static_cast<std::size_t>(T));
    s.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
    s.alpha_bar[0] = 1.0;
    for (int i = 0; i < T; ++i) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
        s.beta[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * frac;
        s.alpha_bar[static_cast<std::size_t>(i) + 1] =
            s.alpha_bar[static_cast<std::size_t>(i)] * (1.0 - s.beta[static_cast<std::size_t>(i)]);
    }
    return s;
}

std::vector<int> sampling_timesteps(int T, int steps)
{
    require(steps >= 1 && steps <= T, "sampling steps must lie in [1, T]");
    std::vector<int> ts(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) {
        ts[static_cast<std::size_t>(steps - i)] =
            static_cast<int>(std::lround(static_cast<double>(i) * T / steps));
    }
    return ts;
}

}  // namespace a2a
