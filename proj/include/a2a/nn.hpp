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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "a2a/autograd.hpp"
#include "a2a/rng.hpp"

namespace a2a::nn {

/// Ordered, named collection of parameter leaves. Every parameter is rank 1
/// or rank 2 (conv weights are stored as [Co, Ci*k*k]).
template <typename T>
class ParamStore {
public:
    ag::Var<T>& add(const std::string& name, Tensor<T> init, bool trainable = true)
    {
        require(!index_.contains(name), "duplicate parameter name: " + name);
        require(init.rank() == 1 || init.rank() == 2, "parameter " + name + " must be rank 1 or 2");
        index_[name] = params_.size();
        params_.emplace_back(name, ag::Var<T>::leaf(std::move(init), trainable));
        return params_.back().second;
    }

    const ag::Var<T>& get(const std::string& name) const
    {
        auto it = index_.find(name);
        require(it != index_.end(), "unknown parameter: " + name);
        return params_[it->second].second;
    }
    ag::Var<T>& get(const std::string& name)
    {
        auto it = index_.find(name);
        require(it != index_.end(), "unknown parameter: " + name);
        return params_[it->second].second;
    }
    bool contains(const std::string& name) const { return index_.contains(name); }

    std::vector<std::pair<std::string, ag::Var<T>>>& entries() { return params_; }
    const std::vector<std::pair<std::string, ag::Var<T>>>& entries() const { return params_; }

    std::size_t scalar_count(bool trainable_only = false) const
    {
        std::size_t n = 0;
        for (const auto& [name, v] : params_) {
            if (!trainable_only || v.requires_grad()) n += v.numel();
        }
        return n;
    }

    void zero_grad()
    {
        for (auto& [name, v] : params_) v.clear_grad();
    }

    void set_trainable(bool on)
    {
        for (auto& [name, v] : params_) v.set_requires_grad(on);
    }

private:
    std::vector<std::pair<std::string, ag::Var<T>>> params_;
    std::map<std::string, std::size_t> index_;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_uniform(Rng& rng, Shape shape, int fan_in, int fan_out)
{
    Tensor<T> t(std::move(shape));
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-a, a));
    return t;
}

template <typename T>
Tensor<T> normal_init(Rng& rng, Shape shape, double stddev)
{
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(stddev * rng.normal());
    return t;
}

/// Adam moment state for one parameter.
template <typename T>
struct AdamSlot {
    std::vector<T> m;
    std::vector<T> v;
};

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Global L2 gradient-norm clip over the group; <= 0 disables.
    double clip_norm = 1.0;
};

/// Adaptive moment estimation over one parameter group, no weight decay.
template <typename T>
class Adam {
public:
    explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

    /// Updates every trainable parameter that received a gradient. Returns the
    /// group's gradient norm before clipping.
    double step(ParamStore<T>& params)
    {
        double sq = 0.0;
        for (auto& [name, p] : params.entries()) {
            if (!p.requires_grad()) continue;
            for (T g : p.grad()) sq += static_cast<double>(g) * g;
        }
        const double norm = std::sqrt(sq);
        const double clip = (opts_.clip_norm > 0 && norm > opts_.clip_norm) ? opts_.clip_norm / norm : 1.0;
        ++t_;
        const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
        for (auto& [name, p] : params.entries()) {
            if (!p.requires_grad() || p.grad().empty()) continue;
            auto& slot = slots_[name];
            if (slot.m.empty()) {
                slot.m.assign(p.numel(), T(0));
                slot.v.assign(p.numel(), T(0));
            }
            auto grad = p.grad();
            auto& w = p.mutable_value().data;
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double g = grad[i] * clip;
                const double m = opts_.beta1 * slot.m[i] + (1.0 - opts_.beta1) * g;
                const double v = opts_.beta2 * slot.v[i] + (1.0 - opts_.beta2) * g * g;
                slot.m[i] = static_cast<T>(m);
                slot.v[i] = static_cast<T>(v);
                w[i] = static_cast<T>(w[i] - opts_.lr * (m / bc1) / (std::sqrt(v / bc2) + opts_.eps));
            }
        }
        return norm;
    }

    const AdamOptions& options() const { return opts_; }
    void set_lr(double lr) { opts_.lr = lr; }
    long long steps() const { return t_; }
    void set_steps(long long t) { t_ = t; }
    std::map<std::string, AdamSlot<T>>& slots() { return slots_; }
    const std::map<std::string, AdamSlot<T>>& slots() const { return slots_; }

private:
    AdamOptions opts_;
    long long t_ = 0;
    std::map<std::string, AdamSlot<T>> slots_;
};

}  // namespace a2a::nn
