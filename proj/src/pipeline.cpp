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

#include "a2a/pipeline.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "a2a/metrics.hpp"

namespace a2a {

Tensor<float> Translator::translate(const Tensor<float>& src_images, const TranslationDirection& dir,
                                    const SampleConfig& cfg, std::uint64_t first_index)
{
    const auto& reg = model_.registry;
    const auto src = reg.id_of(dir.src);
    const auto tgt = reg.id_of(dir.tgt);
    require(src != tgt, "translate: source and target must differ");
    require(cfg.steps >= 1 && cfg.steps <= model_.schedule.T(),
            "translate: steps must lie in [1, " + std::to_string(model_.schedule.T()) + "]");
    require(cfg.eta >= 0.0, "translate: eta must be non-negative");
    const auto& src_codec = model_.codecs[static_cast<std::size_t>(src)];
    src_codec.check_image(src_images);
    const int b = src_images.dim(0);
    const auto& contract = reg.contract();

    LatentBatch z_src = apply_scale(src_codec.encode(src_images, false, nullptr).latent, reg);

    LatentBatch z;
    z.modality = tgt;
    z.scaled = true;
    z.data = Tensor<float>({b, contract.c, contract.h, contract.w});
    const std::size_t item = static_cast<std::size_t>(contract.numel());
    for (int i = 0; i < b; ++i) {
        Rng rng(cfg.seed, first_index + static_cast<std::uint64_t>(i));
        for (std::size_t k = 0; k < item; ++k) z.data.data[static_cast<std::size_t>(i) * item + k] = static_cast<float>(rng.normal());
    }
    Rng step_noise(cfg.seed, 0xdd1 + first_index);

    const auto ts = sampling_timesteps(model_.schedule.T(), cfg.steps);
    const std::vector<int> src_ids(static_cast<std::size_t>(b), src);
    const std::vector<int> tgt_ids(static_cast<std::size_t>(b), tgt);
    Tensor<float> x0;
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const int t = ts[k];
        const int t_prev = ts[k + 1];
        const auto input = construct_input(z, z_src);
        ++counters_.backbone_calls;
        if (predictor_) {
            x0 = predictor_(input, t, src, tgt);
        } else {
            ag::NoGradGuard guard;
            const std::vector<int> tv(static_cast<std::size_t>(b), t);
            x0 = model_.backbone.forward(ag::Var<float>::leaf(input), tv, src_ids, tgt_ids).value();
        }
        require(x0.shape == z.data.shape, "translate: predictor returned " + shape_str(x0.shape));
        z.data = ddim_step(z.data, x0, t, t_prev, cfg.eta, model_.schedule, &step_noise);
    }

    LatentBatch out = z;
    if (model_.adapters_enabled) {
        ++counters_.adapter_calls;
        out = model_.adapters.calibrate(tgt, z);
    }
    ++counters_.decode_calls;
    return model_.codecs[static_cast<std::size_t>(tgt)].decode(remove_scale(out, reg));
}

std::vector<Tensor<float>> unstack(const Tensor<float>& batch)
{
    require(batch.rank() >= 2, "unstack: expects a batch");
    Shape item_shape(batch.shape.begin() + 1, batch.shape.end());
    const std::size_t n = shape_numel(item_shape);
    std::vector<Tensor<float>> out;
    for (int i = 0; i < batch.dim(0); ++i) {
        Tensor<float> t(item_shape);
        std::copy_n(batch.data.begin() + static_cast<std::ptrdiff_t>(i * n), n, t.data.begin());
        out.push_back(std::move(t));
    }
    return out;
}

Tensor<float> stack_tensors(const std::vector<Tensor<float>>& items)
{
    require(!items.empty(), "stack: no tensors");
    Shape shape{static_cast<int>(items.size())};
    shape.insert(shape.end(), items.front().shape.begin(), items.front().shape.end());
    Tensor<float> out(shape);
    const std::size_t n = items.front().numel();
    for (std::size_t i = 0; i < items.size(); ++i) {
        require(items[i].shape == items.front().shape, "stack: mixed shapes");
        std::copy(items[i].data.begin(), items[i].data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    return out;
}

namespace {

MetricSummary summarize(const std::vector<double>& v)
{
    MetricSummary s;
    if (v.empty()) {
        s.mean = std::nan("");
        s.std = std::nan("");
        return s;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(v.size()));
    return s;
}

}  // namespace

MetricsReport score_images(const std::vector<Tensor<float>>& predictions,
                           const std::vector<Tensor<float>>& references, const std::string& direction,
                           DirectionStatus status)
{
    require(!predictions.empty(), "evaluation needs at least one pair");
    require(predictions.size() == references.size(), "evaluation: prediction/reference count mismatch");
    MetricsReport r;
    r.direction = direction;
    r.status = status;
    r.n_pairs = predictions.size();
    std::vector<double> p, s, e;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto a = to_display_range(predictions[i]);
        const auto b = to_display_range(references[i]);
        const double v = psnr(a, b);
        if (std::isinf(v)) ++r.exact_matches;
        else p.push_back(v);
        s.push_back(ssim(a, b));
        e.push_back(rmse(a, b));
    }
    r.psnr = summarize(p);
    if (p.empty()) r.psnr = {kPsnrExact, 0.0};
    r.ssim = summarize(s);
    r.rmse = summarize(e);
    return r;
}

MetricsReport evaluate_direction(const Any2AnyModel& model, const PairedDataset& test,
                                 const TranslationDirection& dir, const SampleConfig& cfg, std::size_t limit)
{
    auto pairs = test.direction_pairs(dir.src, dir.tgt);
    require(!pairs.empty(), "no test pairs for " + dir.label());
    if (limit > 0 && pairs.size() > limit) pairs.resize(limit);
    Translator tr(model);
    std::vector<Tensor<float>> preds;
    std::vector<Tensor<float>> refs;
    const std::size_t bs = static_cast<std::size_t>(std::max(1, cfg.batch));
    for (std::size_t start = 0; start < pairs.size(); start += bs) {
        const std::size_t end = std::min(pairs.size(), start + bs);
        std::vector<std::string> keys;
        for (std::size_t i = start; i < end; ++i) {
            keys.push_back(pairs[i].src);
            refs.push_back(test.image(pairs[i].tgt));
        }
        for (auto& t : unstack(tr.translate(test.stack(keys), dir, cfg, start))) preds.push_back(std::move(t));
    }
    return score_images(preds, refs, dir.label(), dir.status);
}

namespace {

nlohmann::json summary_json(const MetricSummary& s)
{
    auto num = [](double v) -> nlohmann::json {
        if (std::isnan(v)) return nullptr;
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        return v;
    };
    return {{"mean", num(s.mean)}, {"std", num(s.std)}};
}

MetricSummary summary_from(const nlohmann::json& j)
{
    auto num = [](const nlohmann::json& v) {
        if (v.is_null()) return std::nan("");
        if (v.is_string()) return v.get<std::string>() == "inf" ? kPsnrExact : -kPsnrExact;
        return v.get<double>();
    };
    return {num(j.at("mean")), num(j.at("std"))};
}

}  // namespace

std::string report_to_json(const std::vector<MetricsReport>& reports)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        arr.push_back({{"direction", r.direction},
                       {"status", to_string(r.status)},
                       {"n_pairs", r.n_pairs},
                       {"exact_matches", r.exact_matches},
                       {"psnr", summary_json(r.psnr)},
                       {"ssim", summary_json(r.ssim)},
                       {"rmse", summary_json(r.rmse)}});
    }
    return nlohmann::json{{"reports", arr}}.dump(2) + "\n";
}

std::vector<MetricsReport> reports_from_json(const std::string& text)
{
    std::vector<MetricsReport> out;
    try {
        const auto doc = nlohmann::json::parse(text);
        for (const auto& j : doc.at("reports")) {
            MetricsReport r;
            r.direction = j.at("direction").get<std::string>();
            const auto status = j.at("status").get<std::string>();
            require(status == "TRAINED" || status == "ZERO_SHOT", "unknown status " + status);
            r.status = status == "TRAINED" ? DirectionStatus::kTrained : DirectionStatus::kZeroShot;
            r.n_pairs = j.at("n_pairs").get<std::size_t>();
            r.exact_matches = j.at("exact_matches").get<std::size_t>();
            r.psnr = summary_from(j.at("psnr"));
            r.ssim = summary_from(j.at("ssim"));
            r.rmse = summary_from(j.at("rmse"));
            out.push_back(r);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("malformed report JSON: ") + e.what());
    }
    return out;
}

std::string report_table(const std::vector<MetricsReport>& reports)
{
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %-10s %6s %16s %16s %16s\n", "Direction", "Status", "Pairs", "PSNR",
                  "SSIM", "RMSE");
    out += line;
    for (const auto& r : reports) {
        char p[32], s[32], e[32];
        if (std::isinf(r.psnr.mean)) std::snprintf(p, sizeof p, "inf");
        else std::snprintf(p, sizeof p, "%.2f±%.2f", r.psnr.mean, r.psnr.std);
        std::snprintf(s, sizeof s, "%.4f±%.4f", r.ssim.mean, r.ssim.std);
        std::snprintf(e, sizeof e, "%.2f±%.2f", r.rmse.mean, r.rmse.std);
        std::snprintf(line, sizeof line, "%-12s %-10s %6zu %16s %16s %16s\n", r.direction.c_str(),
                      to_string(r.status), r.n_pairs, p, s, e);
        out += line;
    }
    return out;
}

}  // namespace a2a
