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

// Image similarity on the 0-255 scale. Inputs are (C, H, W) or (H, W).

#include <limits>

#include "a2a/tensor.hpp"

namespace a2a {

inline constexpr double kPsnrExact = std::numeric_limits<double>::infinity();

/// Linear map of model outputs in [-1, 1] to [0, 255], no quantization.
Tensor<double> to_display_range(const Tensor<float>& img);

/// 20 log10(range) - 10 log10(MSE); kPsnrExact for identical inputs.
double psnr(const Tensor<double>& a, const Tensor<double>& b, double data_range = 255.0);

/// Gaussian-window SSIM (11x11, sigma 1.5) over valid positions, averaged
/// over channels.
double ssim(const Tensor<double>& a, const Tensor<double>& b, double data_range = 255.0);

double rmse(const Tensor<double>& a, const Tensor<double>& b);

}  // namespace a2a
