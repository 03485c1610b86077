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

#include <doctest.h>

#include <cmath>

#include "a2a/metrics.hpp"
#include "test_util.hpp"

using namespace a2a;

namespace {

// Direct 2-D window sums, weights built from the unnormalized Gaussian.
double naive_ssim_plane(const double* a, const double* b, int h, int w, double range)
{
    double wt[11][11];
    double z = 0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            wt[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
            z += wt[i][j];
        }
    const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
    double total = 0;
    int count = 0;
    for (int y = 0; y + 11 <= h; ++y)
        for (int x = 0; x + 11 <= w; ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    ma += wt[i][j] / z * a[(y + i) * w + x + j];
                    mb += wt[i][j] / z * b[(y + i) * w + x + j];
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double da = a[(y + i) * w + x + j] - ma, db = b[(y + i) * w + x + j] - mb;
                    va += wt[i][j] / z * da * da;
                    vb += wt[i][j] / z * db * db;
                    cov += wt[i][j] / z * da * db;
                }
            total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

Tensor<double> random_image(Shape s, Rng& rng) { return test::uniform_tensor<double>(std::move(s), rng, 0.0, 255.0); }

}  // namespace

TEST_CASE("display range mapping")
{
    Tensor<float> x({3}, std::vector<float>{-1.0f, 0.0f, 1.0f});
    const auto y = to_display_range(x);
    CHECK(y.data[0] == 0.0);
    CHECK(y.data[1] == 127.5);
    CHECK(y.data[2] == 255.0);
}

TEST_CASE("PSNR of a constant offset")
{
    Rng rng(1);
    auto a = random_image({3, 16, 16}, rng);
    for (double d : {0.5, 1.0, 10.0, 100.0}) {
        auto b = a;
        for (auto& v : b.data) v += d;
        CHECK(psnr(a, b) == doctest::Approx(20.0 * std::log10(255.0 / d)).epsilon(1e-12));
        CHECK(rmse(a, b) == doctest::Approx(d).epsilon(1e-12));
    }
    CHECK(psnr(a, a) == kPsnrExact);
    CHECK(std::isinf(psnr(a, a)));
    CHECK(rmse(a, a) == 0.0);
    // Custom range.
    auto b = a;
    for (auto& v : b.data) v += 0.1;
    CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("PSNR decreases as error grows")
{
    Rng rng(2);
    auto a = random_image({16, 16}, rng);
    auto noise = test::random_tensor<double>({16, 16}, rng);
    double prev = kPsnrExact;
    for (double s : {0.1, 1.0, 5.0, 20.0}) {
        auto b = a;
        for (std::size_t i = 0; i < b.numel(); ++i) b.data[i] += s * noise.data[i];
        const double p = psnr(a, b);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("SSIM matches a direct windowed evaluation")
{
    Rng rng(3);
    for (auto shape : {Shape{11, 11}, Shape{14, 19}, Shape{2, 16, 16}}) {
        auto a = random_image(shape, rng);
        auto b = a;
        for (auto& v : b.data) v = 0.6 * v + 40.0 * rng.normal();
        const int c = shape.size() == 3 ? shape[0] : 1;
        const int h = shape[shape.size() - 2], w = shape.back();
        double want = 0;
        for (int ch = 0; ch < c; ++ch)
            want += naive_ssim_plane(a.data.data() + ch * h * w, b.data.data() + ch * h * w, h, w, 255.0);
        want /= c;
        CHECK(ssim(a, b) == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("SSIM properties")
{
    Rng rng(4);
    auto a = random_image({3, 20, 20}, rng);
    auto b = random_image({3, 20, 20}, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(ssim(a, b) < 1.0);
    CHECK(ssim(a, b) >= -1.0);

    // Two flat images: only the luminance term survives.
    Tensor<double> p({12, 12}), q({12, 12});
    for (auto& v : p.data) v = 100.0;
    for (auto& v : q.data) v = 140.0;
    const double c1 = std::pow(0.01 * 255.0, 2);
    CHECK(ssim(p, q) == doctest::Approx((2 * 100.0 * 140.0 + c1) / (100.0 * 100.0 + 140.0 * 140.0 + c1)).epsilon(1e-9));
}

TEST_CASE("metric argument validation")
{
    Tensor<double> a({3, 16, 16}), b({3, 16, 15}), small({10, 10}), flat({256});
    CHECK_THROWS_AS(psnr(a, b), Error);
    CHECK_THROWS_AS(rmse(a, b), Error);
    CHECK_THROWS_AS(ssim(a, b), Error);
    CHECK_THROWS_AS(ssim(small, small), Error);
    CHECK_THROWS_AS(psnr(flat, flat), Error);
}
