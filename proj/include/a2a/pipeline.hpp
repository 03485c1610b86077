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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "a2a/model.hpp"
#include "a2a/synth.hpp"

namespace a2a {

struct SampleConfig {
    int steps = 250;
    double eta = 0.0;
    std::uint64_t seed = 0;
    /// Examples translated per backbone call.
    int batch = 16;
};

/// Replacement for the backbone's clean-latent prediction:
/// (input [B, 2c, h, w], t, src id, tgt id) -> [B, c, h, w].
using X0Predictor = std::function<Tensor<float>(const Tensor<float>&, int, ModalityId, ModalityId)>;

struct PipelineCounters {
    long long backbone_calls = 0;
    long long adapter_calls = 0;
    long long decode_calls = 0;
};

/// encode -> scale -> DDIM over the step subsequence -> calibrate once ->
/// unscale -> decode.
class Translator {
public:
    explicit Translator(const Any2AnyModel& model) : model_(model) {}

    void set_predictor(X0Predictor p) { predictor_ = std::move(p); }
    const PipelineCounters& counters() const { return counters_; }
    void reset_counters() { counters_ = {}; }

    /// Translates a batch (B, C, H, W) of source images. Example i starts from
    /// z_T drawn with Rng(cfg.seed, first_index + i), so with eta = 0 results
    /// do not depend on how examples are grouped into batches.
    Tensor<float> translate(const Tensor<float>& src_images, const TranslationDirection& dir,
                            const SampleConfig& cfg, std::uint64_t first_index = 0);

private:
    const Any2AnyModel& model_;
    X0Predictor predictor_;
    PipelineCounters counters_;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;
};

struct MetricsReport {
    std::string direction;
    DirectionStatus status = DirectionStatus::kZeroShot;
    std::size_t n_pairs = 0;
    /// Pairs with identical images; their infinite PSNR is left out of the mean.
    std::size_t exact_matches = 0;
    MetricSummary psnr;
    MetricSummary ssim;
    MetricSummary rmse;
};

/// Scores predictions against references, both lists of (C, H, W) in [-1, 1].
MetricsReport score_images(const std::vector<Tensor<float>>& predictions,
                           const std::vector<Tensor<float>>& references, const std::string& direction,
                           DirectionStatus status);

/// Translates every source of the direction's test pairs (at most `limit`
/// when positive) and scores the result against the aligned targets.
MetricsReport evaluate_direction(const Any2AnyModel& model, const PairedDataset& test,
                                 const TranslationDirection& dir, const SampleConfig& cfg, std::size_t limit = 0);

std::string report_to_json(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> reports_from_json(const std::string& text);
/// Aligned plain-text table: one row per direction, PSNR / SSIM / RMSE.
std::string report_table(const std::vector<MetricsReport>& reports);

/// Splits (B, ...) into B tensors and back.
std::vector<Tensor<float>> unstack(const Tensor<float>& batch);
Tensor<float> stack_tensors(const std::vector<Tensor<float>>& items);

}  // namespace a2a
