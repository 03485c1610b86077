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

#include "a2a/metrics.hpp"

#include <array>
#include <cmath>

namespace a2a {

namespace {

void check_pair(const Tensor<double>& a, const Tensor<double>& b, const char* what)
{
    require(a.shape == b.shape, std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    require(a.rank() == 2 || a.rank() == 3, std::string(what) + ": expects (C, H, W) or (H, W)");
}

double mse(const Tensor<double>& a, const Tensor<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

constexpr int kWin = 11;

std::array<double, kWin> gaussian_window()
{
    std::array<double, kWin> g{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double x = i - kWin / 2;
        g[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
        sum += g[static_cast<std::size_t>(i)];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// Separable valid-mode filtering of one plane.
std::vector<double> filter_valid(const double* img, int h, int w, const std::array<double, kWin>& g)
{
    const int ow = w - kWin + 1;
    const int oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += g[static_cast<std::size_t>(k)] * img[static_cast<std::size_t>(y) * w + x + k];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += g[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

}  // namespace

Tensor<double> to_display_range(const Tensor<float>& img)
{
    Tensor<double> out(img.shape);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = (static_cast<double>(img.data[i]) + 1.0) * 127.5;
    return out;
}

double psnr(const Tensor<double>& a, const Tensor<double>& b, double data_range)
{
    check_pair(a, b, "psnr");
    const double m = mse(a, b);
    if (m == 0.0) return kPsnrExact;
    return 20.0 * std::log10(data_range) - 10.0 * std::log10(m);
}

double rmse(const Tensor<double>& a, const Tensor<double>& b)
{
    check_pair(a, b, "rmse");
    return std::sqrt(mse(a, b));
}

double ssim(const Tensor<double>& a, const Tensor<double>& b, double data_range)
{
    check_pair(a, b, "ssim");
    const int c = a.rank() == 3 ? a.dim(0) : 1;
    const int h = a.dim(-2);
    const int w = a.dim(-1);
    require(h >= kWin && w >= kWin, "ssim: image " + shape_str(a.shape) + " is smaller than the 11x11 window");
    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    const auto g = gaussian_window();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    double total = 0.0;
    std::vector<double> sq(plane);
    for (int ch = 0; ch < c; ++ch) {
        const double* pa = a.data.data() + ch * plane;
        const double* pb = b.data.data() + ch * plane;
        const auto mu_a = filter_valid(pa, h, w, g);
        const auto mu_b = filter_valid(pb, h, w, g);
        for (std::size_t i = 0; i < plane; ++i) sq[i] = pa[i] * pa[i];
        const auto e_aa = filter_valid(sq.data(), h, w, g);
        for (std::size_t i = 0; i < plane; ++i) sq[i] = pb[i] * pb[i];
        const auto e_bb = filter_valid(sq.data(), h, w, g);
        for (std::size_t i = 0; i < plane; ++i) sq[i] = pa[i] * pb[i];
        const auto e_ab = filter_valid(sq.data(), h, w, g);
        double s = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i];
            const double mb = mu_b[i];
            const double va = e_aa[i] - ma * ma;
            const double vb = e_bb[i] - mb * mb;
            const double cov = e_ab[i] - ma * mb;
            s += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += s / static_cast<double>(mu_a.size());
    }
    return total / c;
}

}  // namespace a2a
