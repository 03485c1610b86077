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
#include "a2a/pipeline.hpp"
#include "fixtures.hpp"

using namespace a2a;

namespace {

void perturb(nn::ParamStore<float>& store, std::uint64_t seed, double s)
{
    Rng rng(seed, 2);
    for (auto& [name, p] : store.entries())
        for (auto& v : p.mutable_value().data) v = static_cast<float>(s * rng.normal());
}

struct World {
    test::TempDir dir{"pipe"};
    Any2AnyModel model = test::tiny_model();
    PairedDataset data = test::tiny_dataset(dir, model.registry, "all-pairs", 0, 5);
};

}  // namespace

TEST_CASE("an oracle predictor reproduces the codec reconstruction of the target")
{
    World w;
    auto& m = w.model;
    m.registry.set_scale_factor(m.registry.id_of("RGB"), 1.7);
    const auto dir = m.registry.resolve_direction("SAR", "RGB", {});
    const auto pairs = w.data.direction_pairs("SAR", "RGB");
    std::vector<std::string> src, tgt;
    for (int i = 0; i < 3; ++i) {
        src.push_back(pairs[i].src);
        tgt.push_back(pairs[i].tgt);
    }
    const auto z_true = apply_scale(m.codec("RGB").encode(w.data.stack(tgt), false, nullptr).latent, m.registry);
    Translator tr(m);
    tr.set_predictor([&](const Tensor<float>& input, int t, ModalityId s, ModalityId g) {
        CHECK(input.dim(1) == 2 * m.registry.contract().c);
        CHECK(t >= 1);
        CHECK(s == m.registry.id_of("SAR"));
        CHECK(g == m.registry.id_of("RGB"));
        return z_true.data;
    });
    SampleConfig cfg;
    cfg.steps = 10;
    const auto out = tr.translate(w.data.stack(src), dir, cfg);
    const auto want = m.codec("RGB").decode(remove_scale(z_true, m.registry));
    REQUIRE(out.shape == want.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.data[i] == doctest::Approx(want.data[i]).epsilon(1e-5));
    CHECK(tr.counters().backbone_calls == 10);
    CHECK(tr.counters().adapter_calls == 1);
    CHECK(tr.counters().decode_calls == 1);
}

TEST_CASE("the adapter branch is applied exactly once before decoding")
{
    World w;
    auto& m = w.model;
    perturb(m.adapters.params(), 5, 0.2);
    const auto dir = m.registry.resolve_direction("NIR", "MS", {});
    const auto pairs = w.data.direction_pairs("NIR", "MS");
    Rng rng(3);
    LatentBatch fixed{test::random_tensor<float>({1, 4, 4, 4}, rng), m.registry.id_of("MS"), true};
    Translator tr(m);
    tr.set_predictor([&](const Tensor<float>&, int, ModalityId, ModalityId) { return fixed.data; });
    SampleConfig cfg;
    cfg.steps = 4;
    const auto out = tr.translate(w.data.stack({pairs[0].src}), dir, cfg);
    const auto want = m.codec("MS").decode(remove_scale(m.adapters.calibrate(fixed.modality, fixed), m.registry));
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.data[i] == doctest::Approx(want.data[i]).epsilon(1e-5));

    m.adapters_enabled = false;
    Translator plain(m);
    plain.set_predictor([&](const Tensor<float>&, int, ModalityId, ModalityId) { return fixed.data; });
    const auto raw = plain.translate(w.data.stack({pairs[0].src}), dir, cfg);
    const auto want_raw = m.codec("MS").decode(remove_scale(fixed, m.registry));
    for (std::size_t i = 0; i < raw.numel(); ++i) CHECK(raw.data[i] == doctest::Approx(want_raw.data[i]).epsilon(1e-5));
    CHECK(plain.counters().adapter_calls == 0);
}

TEST_CASE("translation is deterministic and independent of batching")
{
    World w;
    auto& m = w.model;
    perturb(m.backbone.params(), 7, 0.1);
    const auto dir = m.registry.resolve_direction("RGB", "NIR", {});
    const auto pairs = w.data.direction_pairs("RGB", "NIR");
    std::vector<std::string> keys;
    for (int i = 0; i < 4; ++i) keys.push_back(pairs[i].src);
    SampleConfig cfg;
    cfg.steps = 5;
    cfg.seed = 11;
    Translator tr(m);
    const auto all = tr.translate(w.data.stack(keys), dir, cfg);
    const auto again = tr.translate(w.data.stack(keys), dir, cfg);
    CHECK(test::bitwise_equal(all, again));
    const auto items = unstack(all);
    for (int i = 0; i < 4; ++i) {
        const auto one = tr.translate(w.data.stack({keys[i]}), dir, cfg, i);
        for (std::size_t k = 0; k < one.numel(); ++k) CHECK(one.data[k] == doctest::Approx(items[i].data[k]).epsilon(1e-4));
    }
    cfg.seed = 12;
    CHECK_FALSE(test::bitwise_equal(tr.translate(w.data.stack(keys), dir, cfg), all));
    CHECK(tr.counters().backbone_calls == 5 * 7);
}

TEST_CASE("stochastic sampling draws fresh noise")
{
    World w;
    auto& m = w.model;
    perturb(m.backbone.params(), 8, 0.1);
    const auto dir = m.registry.resolve_direction("RGB", "SAR", {});
    const auto src = w.data.stack({w.data.direction_pairs("RGB", "SAR")[0].src});
    Translator tr(m);
    SampleConfig cfg;
    cfg.steps = 3;
    cfg.eta = 1.0;
    const auto a = tr.translate(src, dir, cfg);
    CHECK(test::bitwise_equal(a, tr.translate(src, dir, cfg)));
    cfg.eta = 0.0;
    CHECK_FALSE(test::bitwise_equal(a, tr.translate(src, dir, cfg)));
}

TEST_CASE("translation argument validation")
{
    World w;
    auto& m = w.model;
    Translator tr(m);
    const auto src = w.data.stack({w.data.direction_pairs("SAR", "RGB")[0].src});
    auto dir = m.registry.resolve_direction("SAR", "RGB", {});
    SampleConfig cfg;
    cfg.steps = 0;
    CHECK_THROWS_AS(tr.translate(src, dir, cfg), Error);
    cfg.steps = 1001;
    CHECK_THROWS_AS(tr.translate(src, dir, cfg), Error);
    cfg.steps = 2;
    cfg.eta = -0.5;
    CHECK_THROWS_AS(tr.translate(src, dir, cfg), Error);
    cfg.eta = 0;
    const auto wrong = w.data.stack({w.data.direction_pairs("RGB", "SAR")[0].src});
    CHECK_THROWS_AS(tr.translate(wrong, dir, cfg), Error);
    tr.set_predictor([](const Tensor<float>&, int, ModalityId, ModalityId) { return Tensor<float>({1, 4, 2, 2}); });
    CHECK_THROWS_AS(tr.translate(src, dir, cfg), Error);
    dir.tgt = "SAR";
    CHECK_THROWS_AS(tr.translate(src, dir, cfg), Error);
}

TEST_CASE("one-step sampling ends at the predicted clean latent")
{
    World w;
    auto& m = w.model;
    const auto dir = m.registry.resolve_direction("SAR", "NIR", {});
    const auto src = w.data.stack({w.data.direction_pairs("SAR", "NIR")[0].src});
    Translator tr(m);
    SampleConfig cfg;
    cfg.steps = 1;
    // A fresh backbone predicts zero, so the result decodes the zero latent.
    const auto out = tr.translate(src, dir, cfg);
    LatentBatch zero{Tensor<float>({1, 4, 4, 4}), m.registry.id_of("NIR"), true};
    const auto want = m.codec("NIR").decode(remove_scale(zero, m.registry));
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.data[i] == doctest::Approx(want.data[i]).epsilon(1e-6));
}

TEST_CASE("scoring: exact matches, population statistics")
{
    Rng rng(5);
    auto a = test::uniform_tensor<float>({1, 12, 12}, rng, -1, 1);
    auto b = a;
    for (auto& v : b.data) v += 0.02f;
    auto c = a;
    for (auto& v : c.data) v -= 0.1f;
    const auto r = score_images({a, b, c}, {a, a, a}, "SAR:RGB", DirectionStatus::kTrained);
    CHECK(r.n_pairs == 3);
    CHECK(r.exact_matches == 1);
    const double pb = psnr(to_display_range(b), to_display_range(a));
    const double pc = psnr(to_display_range(c), to_display_range(a));
    CHECK(r.psnr.mean == doctest::Approx((pb + pc) / 2).epsilon(1e-12));
    CHECK(r.psnr.std == doctest::Approx(std::abs(pb - pc) / 2).epsilon(1e-12));
    const double sb = ssim(to_display_range(b), to_display_range(a));
    const double sc = ssim(to_display_range(c), to_display_range(a));
    const double sm = (1.0 + sb + sc) / 3;
    CHECK(r.ssim.mean == doctest::Approx(sm).epsilon(1e-12));
    CHECK(r.ssim.std == doctest::Approx(std::sqrt(((1 - sm) * (1 - sm) + (sb - sm) * (sb - sm) + (sc - sm) * (sc - sm)) / 3)).epsilon(1e-9));
    CHECK(r.rmse.mean > 0);

    const auto all_exact = score_images({a}, {a}, "X:Y", DirectionStatus::kZeroShot);
    CHECK(all_exact.exact_matches == 1);
    CHECK(all_exact.psnr.mean == kPsnrExact);

    CHECK_THROWS_AS(score_images({}, {}, "X:Y", DirectionStatus::kTrained), Error);
    CHECK_THROWS_AS(score_images({a}, {a, a}, "X:Y", DirectionStatus::kTrained), Error);
}

TEST_CASE("report JSON round trip and table")
{
    MetricsReport a;
    a.direction = "SAR:RGB";
    a.status = DirectionStatus::kTrained;
    a.n_pairs = 12;
    a.psnr = {23.25, 1.5};
    a.ssim = {0.625, 0.0625};
    a.rmse = {12.5, 2.0};
    MetricsReport b = a;
    b.direction = "RGB:PAN";
    b.status = DirectionStatus::kZeroShot;
    b.exact_matches = 2;
    b.n_pairs = 2;
    b.psnr = {kPsnrExact, 0.0};
    b.rmse = {std::nan(""), std::nan("")};
    const auto back = reports_from_json(report_to_json({a, b}));
    REQUIRE(back.size() == 2);
    CHECK(back[0].direction == "SAR:RGB");
    CHECK(back[0].status == DirectionStatus::kTrained);
    CHECK(back[0].n_pairs == 12);
    CHECK(back[0].psnr.mean == 23.25);
    CHECK(back[0].ssim.std == 0.0625);
    CHECK(back[1].status == DirectionStatus::kZeroShot);
    CHECK(back[1].exact_matches == 2);
    CHECK(back[1].psnr.mean == kPsnrExact);
    CHECK(std::isnan(back[1].rmse.mean));
    CHECK_THROWS_AS(reports_from_json("{\"reports\": [{\"direction\": 1}]}"), Error);
    CHECK_THROWS_AS(reports_from_json("not json"), Error);

    const auto table = report_table({a, b});
    CHECK(table.find("SAR:RGB") != std::string::npos);
    CHECK(table.find("23.25±1.50") != std::string::npos);
    CHECK(table.find("ZERO_SHOT") != std::string::npos);
    CHECK(table.find("inf") != std::string::npos);
}

TEST_CASE("direction evaluation covers the requested pairs")
{
    World w;
    auto& m = w.model;
    const auto dir = m.registry.resolve_direction("SAR", "PAN", {});
    SampleConfig cfg;
    cfg.steps = 2;
    cfg.batch = 4;
    const auto r = evaluate_direction(m, w.data, dir, cfg, 5);
    CHECK(r.n_pairs == 5);
    CHECK(r.direction == "SAR:PAN");
    CHECK(r.status == DirectionStatus::kZeroShot);
    CHECK(std::isfinite(r.psnr.mean));
    const auto full = evaluate_direction(m, w.data, dir, cfg);
    CHECK(full.n_pairs == w.data.direction_pairs("SAR", "PAN").size());
    CHECK(full.n_pairs == 6);
}

TEST_CASE("stack and unstack are inverse")
{
    Rng rng(6);
    auto batch = test::random_tensor<float>({3, 2, 4, 5}, rng);
    const auto items = unstack(batch);
    REQUIRE(items.size() == 3);
    CHECK(items[1].shape == Shape{2, 4, 5});
    CHECK(test::bitwise_equal(stack_tensors(items), batch));
    CHECK_THROWS_AS(stack_tensors({}), Error);
    CHECK_THROWS_AS(stack_tensors({items[0], Tensor<float>({2, 4, 4})}), Error);
}
