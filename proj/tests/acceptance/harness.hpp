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

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "a2a/rng.hpp"
#include "a2a/tensor.hpp"

namespace a2a::acceptance {

/// Collects the sub-checks of one criterion. A criterion passes when every
/// check holds; each failing check is printed with its measured value.
class Gate {
public:
    explicit Gate(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

    bool expect(bool ok, const std::string& what)
    {
        if (!ok) failures_.push_back(what);
        return ok;
    }
    void note(const std::string& line) { notes_.push_back(line); }

    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    bool passed() const { return failures_.empty(); }
    const std::string& name() const { return name_; }
    const std::vector<std::string>& failures() const { return failures_; }
    const std::vector<std::string>& notes() const { return notes_; }

private:
    std::string name_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
};

/// Shared knobs; `work` holds datasets and checkpoints.
struct Context {
    std::filesystem::path work;
    bool verbose = true;
};

inline std::string fmt(double v, int prec = 4)
{
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

template <typename T>
Tensor<T> normal_tensor(Shape shape, Rng& rng, double stddev = 1.0)
{
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(stddev * rng.normal());
    return t;
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, Rng& rng, double lo, double hi)
{
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

/// ||a - b|| / ||b|| over all entries (b == 0 compares against 1).
template <typename T>
double norm_rel(const Tensor<T>& a, const Tensor<T>& b)
{
    double d = 0.0;
    double n = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double x = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        d += x * x;
        n += static_cast<double>(b.data[i]) * static_cast<double>(b.data[i]);
    }
    return std::sqrt(d) / std::max(std::sqrt(n), 1e-300);
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.shape != b.shape) return false;
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(T)) == 0;
}

void criterion_diffusion_algebra(Gate& g, const Context& ctx);
void criterion_gradients(Gate& g, const Context& ctx);
void criterion_structure(Gate& g, const Context& ctx);
void criterion_desk_run(Gate& g, const Context& ctx);
void criterion_ablations(Gate& g, const Context& ctx);
void criterion_metrics(Gate& g, const Context& ctx);
void criterion_serialization(Gate& g, const Context& ctx);

}  // namespace a2a::acceptance
