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

#include <omp.h>

#include <cmath>

#include "a2a/kernels.hpp"
#include "test_util.hpp"

using namespace a2a;
namespace k = a2a::kernels;

namespace {

// Naive reference implementations, written independently of the kernels.

std::vector<double> naive_gemm(bool ta, bool tb, int m, int n, int kk, const std::vector<double>& a,
                               const std::vector<double>& b)
{
    std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < kk; ++p) {
                const double av = ta ? a[static_cast<std::size_t>(p) * m + i] : a[static_cast<std::size_t>(i) * kk + p];
                const double bv = tb ? b[static_cast<std::size_t>(j) * kk + p] : b[static_cast<std::size_t>(p) * n + j];
                s += av * bv;
            }
            c[static_cast<std::size_t>(i) * n + j] = s;
        }
    }
    return c;
}

std::vector<double> naive_conv(const k::ConvGeom& g, const std::vector<double>& x, const std::vector<double>& w,
                               const std::vector<double>& bias)
{
    const int ho = g.out_height();
    const int wo = g.out_width();
    std::vector<double> y(static_cast<std::size_t>(g.batch) * g.out_channels * ho * wo);
    for (int b = 0; b < g.batch; ++b) {
        for (int co = 0; co < g.out_channels; ++co) {
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    double s = bias[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < g.in_channels; ++ci) {
                        for (int ky = 0; ky < g.kernel; ++ky) {
                            for (int kx = 0; kx < g.kernel; ++kx) {
                                const int iy = oy * g.stride - g.pad + ky;
                                const int ix = ox * g.stride - g.pad + kx;
                                if (iy < 0 || ix < 0 || iy >= g.height || ix >= g.width) continue;
                                s += w[static_cast<std::size_t>(co) * g.patch_size() + (ci * g.kernel + ky) * g.kernel + kx] *
                                     x[((static_cast<std::size_t>(b) * g.in_channels + ci) * g.height + iy) * g.width + ix];
                            }
                        }
                    }
                    y[((static_cast<std::size_t>(b) * g.out_channels + co) * ho + oy) * wo + ox] = s;
                }
            }
        }
    }
    return y;
}

std::vector<double> naive_attention(const k::AttnGeom& g, const std::vector<double>& qkv)
{
    const int d = g.width;
    const int hd = g.head_dim();
    std::vector<double> out(static_cast<std::size_t>(g.batch) * g.tokens * d, 0.0);
    for (int b = 0; b < g.batch; ++b) {
        for (int h = 0; h < g.heads; ++h) {
            for (int i = 0; i < g.tokens; ++i) {
                std::vector<double> s(static_cast<std::size_t>(g.tokens));
                double mx = -1e300;
                for (int j = 0; j < g.tokens; ++j) {
                    double dot = 0.0;
                    for (int e = 0; e < hd; ++e) {
                        dot += qkv[(static_cast<std::size_t>(b) * g.tokens + i) * 3 * d + h * hd + e] *
                               qkv[(static_cast<std::size_t>(b) * g.tokens + j) * 3 * d + d + h * hd + e];
                    }
                    s[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(hd));
                    mx = std::max(mx, s[static_cast<std::size_t>(j)]);
                }
                double z = 0.0;
                for (auto& v : s) z += (v = std::exp(v - mx));
                for (int e = 0; e < hd; ++e) {
                    double acc = 0.0;
                    for (int j = 0; j < g.tokens; ++j) {
                        acc += s[static_cast<std::size_t>(j)] / z *
                               qkv[(static_cast<std::size_t>(b) * g.tokens + j) * 3 * d + 2 * d + h * hd + e];
                    }
                    out[(static_cast<std::size_t>(b) * g.tokens + i) * d + h * hd + e] = acc;
                }
            }
        }
    }
    return out;
}

std::vector<double> randv(std::size_t n, Rng& rng)
{
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

template <typename T>
std::vector<T> cast_vec(const std::vector<double>& v)
{
    return std::vector<T>(v.begin(), v.end());
}

template <typename T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b)
{
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

struct ThreadCount {
    explicit ThreadCount(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
    ~ThreadCount() { omp_set_num_threads(saved); }
    int saved;
};

}  // namespace

TEST_CASE("gemm matches the naive product in every transpose mode")
{
    Rng rng(1);
    for (int ta = 0; ta < 2; ++ta) {
        for (int tb = 0; tb < 2; ++tb) {
            const int m = 37, n = 29, kk = 41;
            const auto a = randv(static_cast<std::size_t>(m) * kk, rng);
            const auto b = randv(static_cast<std::size_t>(kk) * n, rng);
            const auto want = naive_gemm(ta, tb, m, n, kk, a, b);
            std::vector<double> c(want.size(), 0.0);
            k::serial::gemm<double>(ta, tb, m, n, kk, a.data(), b.data(), c.data(), false);
            for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(want[i]).epsilon(1e-12));
            // accumulate adds onto existing values
            k::serial::gemm<double>(ta, tb, m, n, kk, a.data(), b.data(), c.data(), true);
            for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(2 * want[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("omp kernels agree bitwise with the serial reference")
{
    Rng rng(2);
    for (int threads : {1, 2, 3, 4}) {
        ThreadCount tc(threads);
        CAPTURE(threads);
        SUBCASE("gemm")
        {
            for (int ta = 0; ta < 2; ++ta) {
                for (int tb = 0; tb < 2; ++tb) {
                    const int m = 70, n = 65, kk = 33;
                    const auto a = cast_vec<float>(randv(static_cast<std::size_t>(m) * kk, rng));
                    const auto b = cast_vec<float>(randv(static_cast<std::size_t>(kk) * n, rng));
                    std::vector<float> c1(static_cast<std::size_t>(m) * n, 0.5f), c2 = c1;
                    k::serial::gemm<float>(ta, tb, m, n, kk, a.data(), b.data(), c1.data(), true);
                    k::omp::gemm<float>(ta, tb, m, n, kk, a.data(), b.data(), c2.data(), true);
                    CHECK(same_bits(c1, c2));
                }
            }
        }
        SUBCASE("conv2d forward and backward")
        {
            for (int stride : {1, 2}) {
                k::ConvGeom g{5, 3, 12, 12, 7, 3, stride, 1};
                const auto x = cast_vec<float>(randv(static_cast<std::size_t>(g.batch) * 3 * 144, rng));
                const auto w = cast_vec<float>(randv(static_cast<std::size_t>(7) * g.patch_size(), rng));
                const auto bias = cast_vec<float>(randv(7, rng));
                const std::size_t ny = static_cast<std::size_t>(g.batch) * 7 * g.out_height() * g.out_width();
                std::vector<float> y1(ny), y2(ny);
                k::serial::conv2d_forward<float>(g, x.data(), w.data(), bias.data(), y1.data());
                k::omp::conv2d_forward<float>(g, x.data(), w.data(), bias.data(), y2.data());
                CHECK(same_bits(y1, y2));
                const auto dy = cast_vec<float>(randv(ny, rng));
                std::vector<float> dx1(x.size()), dx2(x.size()), dw1(w.size()), dw2(w.size()), db1(7), db2(7);
                k::serial::conv2d_backward<float>(g, x.data(), w.data(), dy.data(), dx1.data(), dw1.data(), db1.data());
                k::omp::conv2d_backward<float>(g, x.data(), w.data(), dy.data(), dx2.data(), dw2.data(), db2.data());
                CHECK(same_bits(dx1, dx2));
                CHECK(same_bits(dw1, dw2));
                CHECK(same_bits(db1, db2));
            }
        }
        SUBCASE("attention forward and backward")
        {
            k::AttnGeom g{3, 16, 32, 4};
            const auto qkv = cast_vec<float>(randv(static_cast<std::size_t>(3) * 16 * 96, rng));
            const std::size_t no = static_cast<std::size_t>(3) * 16 * 32;
            const std::size_t np = static_cast<std::size_t>(3) * 4 * 16 * 16;
            std::vector<float> o1(no), o2(no), p1(np), p2(np);
            k::serial::attention_forward<float>(g, qkv.data(), o1.data(), p1.data());
            k::omp::attention_forward<float>(g, qkv.data(), o2.data(), p2.data());
            CHECK(same_bits(o1, o2));
            CHECK(same_bits(p1, p2));
            const auto dout = cast_vec<float>(randv(no, rng));
            std::vector<float> d1(qkv.size()), d2(qkv.size());
            k::serial::attention_backward<float>(g, qkv.data(), p1.data(), dout.data(), d1.data());
            k::omp::attention_backward<float>(g, qkv.data(), p2.data(), dout.data(), d2.data());
            CHECK(same_bits(d1, d2));
        }
    }
}

TEST_CASE("conv2d forward matches the direct sum")
{
    Rng rng(3);
    for (int stride : {1, 2}) {
        k::ConvGeom g{2, 3, 9, 9, 4, 3, stride, 1};
        const auto x = randv(static_cast<std::size_t>(2) * 3 * 81, rng);
        const auto w = randv(static_cast<std::size_t>(4) * g.patch_size(), rng);
        const auto bias = randv(4, rng);
        const auto want = naive_conv(g, x, w, bias);
        std::vector<double> y(want.size());
        k::serial::conv2d_forward<double>(g, x.data(), w.data(), bias.data(), y.data());
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d backward is the adjoint of forward")
{
    // <conv(x), dy> == <x, conv^T(dy)> and the weight/bias gradients follow
    // from linearity in w and b.
    Rng rng(4);
    k::ConvGeom g{2, 3, 8, 8, 5, 3, 2, 1};
    const auto x = randv(static_cast<std::size_t>(2) * 3 * 64, rng);
    const auto w = randv(static_cast<std::size_t>(5) * g.patch_size(), rng);
    const std::vector<double> zero_b(5, 0.0);
    const std::size_t ny = static_cast<std::size_t>(2) * 5 * g.out_height() * g.out_width();
    const auto dy = randv(ny, rng);
    std::vector<double> y(ny), dx(x.size()), dw(w.size()), db(5);
    k::serial::conv2d_forward<double>(g, x.data(), w.data(), zero_b.data(), y.data());
    k::serial::conv2d_backward<double>(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    double lhs = 0.0, rhs_x = 0.0, rhs_w = 0.0;
    for (std::size_t i = 0; i < ny; ++i) lhs += y[i] * dy[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs_x += x[i] * dx[i];
    for (std::size_t i = 0; i < w.size(); ++i) rhs_w += w[i] * dw[i];
    CHECK(lhs == doctest::Approx(rhs_x).epsilon(1e-10));
    CHECK(lhs == doctest::Approx(rhs_w).epsilon(1e-10));
    const int per = g.out_height() * g.out_width();
    for (int co = 0; co < 5; ++co) {
        double s = 0.0;
        for (int b = 0; b < 2; ++b) {
            for (int p = 0; p < per; ++p) s += dy[(static_cast<std::size_t>(b) * 5 + co) * per + p];
        }
        CHECK(db[static_cast<std::size_t>(co)] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("attention forward matches the direct softmax")
{
    Rng rng(5);
    k::AttnGeom g{2, 9, 12, 3};
    const auto qkv = randv(static_cast<std::size_t>(2) * 9 * 36, rng);
    const auto want = naive_attention(g, qkv);
    std::vector<double> out(want.size()), probs(static_cast<std::size_t>(2) * 3 * 81);
    k::serial::attention_forward<double>(g, qkv.data(), out.data(), probs.data());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(want[i]).epsilon(1e-12));
    for (int r = 0; r < 2 * 3 * 9; ++r) {
        double s = 0.0;
        for (int j = 0; j < 9; ++j) s += probs[static_cast<std::size_t>(r) * 9 + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("attention backward matches finite differences")
{
    Rng rng(6);
    k::AttnGeom g{1, 5, 8, 2};
    auto qkv = randv(static_cast<std::size_t>(5) * 24, rng);
    const auto dout = randv(static_cast<std::size_t>(5) * 8, rng);
    std::vector<double> out(40), probs(50), dqkv(qkv.size(), 0.0);
    k::serial::attention_forward<double>(g, qkv.data(), out.data(), probs.data());
    k::serial::attention_backward<double>(g, qkv.data(), probs.data(), dout.data(), dqkv.data());
    auto loss = [&](const std::vector<double>& in) {
        std::vector<double> o(40), p(50);
        k::serial::attention_forward<double>(g, in.data(), o.data(), p.data());
        double s = 0.0;
        for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * dout[i];
        return s;
    };
    for (std::size_t i = 0; i < qkv.size(); ++i) {
        auto plus = qkv;
        auto minus = qkv;
        plus[i] += 1e-6;
        minus[i] -= 1e-6;
        const double fd = (loss(plus) - loss(minus)) / 2e-6;
        CHECK(dqkv[i] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
}
