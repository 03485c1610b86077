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

#include <cstdio>
#include <iostream>
#include <optional>

#include "a2a/checkpoint.hpp"
#include "a2a/io.hpp"
#include "a2a/pipeline.hpp"
#include "a2a/synth.hpp"
#include "a2a/training.hpp"
#include "harness.hpp"

namespace a2a::acceptance {
namespace {

// Desk-scale settings shared by the end-to-end run and the ablations.
constexpr std::uint64_t kTrainSeeds = 512;
constexpr std::uint64_t kTestFirst = 100000;
constexpr std::uint64_t kTestLast = 100063;
constexpr long long kCodecSteps = 500;
constexpr long long kStage2Steps = 4000;
constexpr int kStage2Batch = 32;
constexpr long long kAblationHalf = 600;
constexpr int kAblationBatch = 16;
constexpr int kSamplingSteps = 25;

BackboneConfig desk_backbone(const ModalityRegistry& reg)
{
    BackboneConfig bc;
    bc.latent = reg.contract();
    bc.num_modalities = reg.size();
    bc.width = 64;
    bc.depth = 4;
    return bc;
}

void progress(const std::string& line)
{
    std::cout << "    " << line << std::endl;
}

/// Datasets plus a checkpoint holding trained codecs and scale factors.
struct DeskAssets {
    std::filesystem::path train;
    std::filesystem::path test;
    std::filesystem::path codecs;
};

/// Held-out std of scaled posterior means, population form.
double scaled_std(const Codec<float>& codec, const Tensor<float>& images, double scale)
{
    double sum = 0.0;
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& t : encode_means(codec, images)) {
        for (float v : t.data) {
            const double x = scale * v;
            sum += x;
            sq += x * x;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    return std::sqrt(sq / static_cast<double>(n) - mean * mean);
}

std::optional<DeskAssets> g_assets;

/// Generates the data and trains the codecs once per process. Codec and
/// scale checks are recorded on `g` when given.
const DeskAssets& desk_assets(const Context& ctx, Gate* g)
{
    if (g_assets) return *g_assets;
    DeskAssets a{ctx.work / "desk_train", ctx.work / "desk_test", ctx.work / "desk_codecs"};
    for (const auto& p : {a.train, a.test, a.codecs}) std::filesystem::remove_all(p);
    auto model = Any2AnyModel::create(default_registry(), ModelConfig{});
    const auto man = make_paired_dataset(0, kTrainSeeds - 1, "seven-pair", model.registry, a.train);
    make_paired_dataset(kTestFirst, kTestLast, "all-pairs", model.registry, a.test);
    progress("generated " + std::to_string(kTrainSeeds) + " training scenes (" + std::to_string(man.rows) +
             " pairs) and " + std::to_string(kTestLast - kTestFirst + 1) + " held-out scenes");
    const auto train = PairedDataset::ingest(a.train, model.registry);
    const auto test = PairedDataset::ingest(a.test, model.registry);
    for (const auto& spec : model.registry.specs()) {
        auto& codec = model.codec(spec.name);
        const auto images = train.stack(train.modality_images(spec.name));
        VaeTrainConfig vc;
        vc.steps = kCodecSteps;
        vc.lr = 1e-3;
        const auto res = train_vae(codec, images, vc);
        model.steps["vae." + spec.name] = kCodecSteps;
        const auto held = test.stack(test.modality_images(spec.name));
        const double psnr_held = roundtrip_psnr(codec, held);
        const double scale = estimate_scale(encode_means(codec, images));
        model.registry.set_scale_factor(model.registry.id_of(spec.name), scale);
        const double sd_train = scaled_std(codec, images, scale);
        const double sd_held = scaled_std(codec, held, scale);
        char line[200];
        std::snprintf(line, sizeof line, "codec %-3s round-trip PSNR train %.2f held-out %.2f dB; scale %.4f, scaled std train %.4f held-out %.4f",
                      spec.name.c_str(), res.psnr, psnr_held, scale, sd_train, sd_held);
        progress(line);
        if (g) {
            g->note(line);
            g->expect(res.psnr > 25.0 && psnr_held > 25.0, "codec " + spec.name + " round-trip PSNR " + fmt(res.psnr) +
                                                                " / held-out " + fmt(psnr_held) + " not above 25 dB");
            g->expect(std::abs(sd_train - 1.0) <= 0.1 && std::abs(sd_held - 1.0) <= 0.1,
                      "scaled latent std of " + spec.name + " is " + fmt(sd_train) + " / held-out " + fmt(sd_held));
        }
    }
    save_checkpoint(model, a.codecs);
    g_assets = a;
    return *g_assets;
}

struct Scored {
    MetricsReport report;
    bool valid = true;
};

/// Translates every held-out pair of the direction and scores it.
Scored score_direction(const Any2AnyModel& model, const PairedDataset& test, const TranslationDirection& dir)
{
    SampleConfig sc;
    sc.steps = kSamplingSteps;
    const auto pairs = test.direction_pairs(dir.src, dir.tgt);
    Translator tr(model);
    std::vector<Tensor<float>> preds;
    std::vector<Tensor<float>> refs;
    const auto& tgt = model.registry.spec(dir.tgt);
    Scored out;
    const std::size_t chunk = 32;
    for (std::size_t s = 0; s < pairs.size(); s += chunk) {
        std::vector<std::string> keys;
        for (std::size_t i = s; i < std::min(pairs.size(), s + chunk); ++i) {
            keys.push_back(pairs[i].src);
            refs.push_back(test.image(pairs[i].tgt));
        }
        for (auto& p : unstack(tr.translate(test.stack(keys), dir, sc, s))) {
            out.valid = out.valid && p.shape == Shape{tgt.channels, tgt.native_size, tgt.native_size};
            for (float v : p.data) out.valid = out.valid && std::isfinite(v) && v >= -1.0f && v <= 1.0f;
            preds.push_back(std::move(p));
        }
    }
    out.report = score_images(preds, refs, dir.label(), dir.status);
    return out;
}

/// Per-pixel mean of a modality's training images, used as a prediction
/// for every held-out pair.
MetricsReport constant_mean_baseline(const PairedDataset& train, const PairedDataset& test,
                                     const TranslationDirection& dir)
{
    const auto keys = train.modality_images(dir.tgt);
    Tensor<double> acc(train.image(keys.front()).shape);
    for (const auto& k : keys) {
        const auto& img = train.image(k);
        for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += img.data[i];
    }
    Tensor<float> mean(acc.shape);
    for (std::size_t i = 0; i < acc.data.size(); ++i) mean.data[i] = static_cast<float>(acc.data[i] / keys.size());
    std::vector<Tensor<float>> preds;
    std::vector<Tensor<float>> refs;
    for (const auto& p : test.direction_pairs(dir.src, dir.tgt)) {
        preds.push_back(mean);
        refs.push_back(test.image(p.tgt));
    }
    return score_images(preds, refs, dir.label(), dir.status);
}

/// Uniform noise on [-1, 1] for every held-out pair.
MetricsReport random_noise_baseline(const PairedDataset& test, const TranslationDirection& dir, std::uint64_t seed)
{
    Rng rng(seed, 13);
    std::vector<Tensor<float>> preds;
    std::vector<Tensor<float>> refs;
    for (const auto& p : test.direction_pairs(dir.src, dir.tgt)) {
        refs.push_back(test.image(p.tgt));
        preds.push_back(uniform_tensor<float>(refs.back().shape, rng, -1.0, 1.0));
    }
    return score_images(preds, refs, dir.label(), dir.status);
}

void train_steps(Stage2Trainer& trainer, long long steps, const std::string& tag)
{
    double acc = 0.0;
    const long long every = std::max(1LL, steps / 4);
    for (long long i = 0; i < steps; ++i) {
        acc += trainer.step().l_z0;
        if ((i + 1) % every == 0) {
            progress(tag + " step " + std::to_string(i + 1) + "/" + std::to_string(steps) + " mean L_z0 " +
                     fmt(acc / static_cast<double>(every)));
            acc = 0.0;
        }
    }
}

/// Codecs and scales from the shared checkpoint with a fresh backbone.
Any2AnyModel fresh_stage2_model(const DeskAssets& a)
{
    auto model = load_checkpoint(a.codecs);
    model.reset_backbone(desk_backbone(model.registry));
    model.trained.clear();
    return model;
}

}  // namespace

void criterion_desk_run(Gate& g, const Context& ctx)
{
    const auto& assets = desk_assets(ctx, &g);
    auto model = fresh_stage2_model(assets);
    const auto train = PairedDataset::ingest(assets.train, model.registry);
    const auto test = PairedDataset::ingest(assets.test, model.registry);

    Stage2Config sc;
    sc.lr = 1e-3;
    sc.batch = kStage2Batch;
    Stage2Trainer trainer(model, train, sc);
    trainer.extend_directions(protocol_directions(seven_pair_protocol()));
    g.expect(model.trained.size() == 14, "trained set has " + std::to_string(model.trained.size()) + " directions");
    train_steps(trainer, kStage2Steps, "stage II");
    model.steps["stage2"] = kStage2Steps;
    save_checkpoint(model, ctx.work / "desk_model");

    std::vector<MetricsReport> reports;
    std::string table = "Direction    Status      PSNR   mean-base  delta   noise-base  delta\n";
    int zero_shot = 0;
    for (const auto& dir : model.registry.list_directions(model.trained, DirectionFilter::kAll)) {
        const auto scored = score_direction(model, test, dir);
        const auto& r = scored.report;
        const auto mean_base = constant_mean_baseline(train, test, dir);
        const auto noise_base = random_noise_baseline(test, dir, 5);
        char line[160];
        std::snprintf(line, sizeof line, "%-12s %-10s %6.2f  %9.2f  %+6.2f  %10.2f  %+6.2f\n", dir.label().c_str(),
                      to_string(dir.status), r.psnr.mean, mean_base.psnr.mean, r.psnr.mean - mean_base.psnr.mean,
                      noise_base.psnr.mean, r.psnr.mean - noise_base.psnr.mean);
        table += line;
        g.expect(scored.valid, dir.label() + " produced non-finite or malformed outputs");
        g.expect(std::isfinite(r.psnr.mean) && std::isfinite(r.ssim.mean) && std::isfinite(r.rmse.mean),
                 dir.label() + " has non-finite metrics");
        if (dir.status == DirectionStatus::kTrained) {
            g.expect(r.psnr.mean >= mean_base.psnr.mean + 3.0,
                     dir.label() + " PSNR " + fmt(r.psnr.mean) + " < constant-mean baseline " + fmt(mean_base.psnr.mean) + " + 3");
        } else {
            ++zero_shot;
            g.expect(r.psnr.mean >= noise_base.psnr.mean,
                     dir.label() + " PSNR " + fmt(r.psnr.mean) + " < random-noise baseline " + fmt(noise_base.psnr.mean));
        }
        reports.push_back(r);
    }
    g.expect(zero_shot == 6, std::to_string(zero_shot) + " zero-shot directions instead of 6");
    io::write_text(ctx.work / "desk_report.json", report_to_json(reports));
    io::write_text(ctx.work / "desk_table.txt", report_table(reports) + "\n" + table);
    std::cout << report_table(reports) << "\n" << table;
    g.note("desk model and reports in " + ctx.work.string());
    g.expect(g.seconds() < 7200.0, "runtime " + fmt(g.seconds()) + " s exceeds 2 h");
}

void criterion_ablations(Gate& g, const Context& ctx)
{
    const auto& assets = desk_assets(ctx, nullptr);
    const auto probe_model = load_checkpoint(assets.codecs);
    const auto train = PairedDataset::ingest(assets.train, probe_model.registry);
    const auto test = PairedDataset::ingest(assets.test, probe_model.registry);
    const DirectionSet sar_rgb{{"SAR", "RGB"}};
    const DirectionSet pair{{"SAR", "RGB"}, {"RGB", "SAR"}};

    Stage2Config sc;
    sc.lr = 1e-3;
    sc.batch = kAblationBatch;
    const auto snapshot = ctx.work / "ablation_single_half";

    auto sar_rgb_psnr = [&](const Any2AnyModel& m) {
        return score_direction(m, test, m.registry.resolve_direction("SAR", "RGB", m.trained)).report.psnr.mean;
    };

    // Single direction from scratch, adapters on; snapshot at the halfway point.
    auto single = fresh_stage2_model(assets);
    double with_adapter = 0.0;
    double start_psnr = 0.0;
    {
        Stage2Trainer tr(single, train, sc);
        tr.extend_directions(sar_rgb);
        train_steps(tr, kAblationHalf, "single (adapters)");
        single.steps["stage2"] = kAblationHalf;
        const auto state = tr.optimizer_state();
        save_checkpoint(single, snapshot, &state);
        start_psnr = sar_rgb_psnr(single);
        train_steps(tr, kAblationHalf, "single (adapters)");
        with_adapter = sar_rgb_psnr(single);
    }
    // Same run without adapters.
    double without_adapter = 0.0;
    {
        auto m = fresh_stage2_model(assets);
        m.adapters_enabled = false;
        Stage2Trainer tr(m, train, sc);
        tr.extend_directions(sar_rgb);
        train_steps(tr, 2 * kAblationHalf, "single (no adapters)");
        without_adapter = sar_rgb_psnr(m);
    }
    // Two directions from scratch.
    double scratch = 0.0;
    {
        auto m = fresh_stage2_model(assets);
        Stage2Trainer tr(m, train, sc);
        tr.extend_directions(pair);
        train_steps(tr, 2 * kAblationHalf, "two-direction scratch");
        scratch = sar_rgb_psnr(m);
    }
    // Continued training from the single-direction snapshot.
    auto continue_from_snapshot = [&](const DirectionSet& extra, const std::string& tag) {
        nn::Adam<float> bb;
        nn::Adam<float> ad;
        OptimizerState st;
        st.groups["backbone"] = &bb;
        st.groups["adapters"] = &ad;
        auto m = load_checkpoint(snapshot, &st);
        Stage2Config cont = sc;
        cont.seed = 1;
        Stage2Trainer tr(m, train, cont);
        tr.backbone_optimizer().slots() = bb.slots();
        tr.backbone_optimizer().set_steps(bb.steps());
        tr.adapter_optimizer().slots() = ad.slots();
        tr.adapter_optimizer().set_steps(ad.steps());
        tr.extend_directions(extra);
        train_steps(tr, kAblationHalf, tag);
        return sar_rgb_psnr(m);
    };
    const double incremental = continue_from_snapshot(pair, "incremental +RGB:SAR");
    const double grown = continue_from_snapshot(protocol_directions(seven_pair_protocol()), "incremental +13 directions");

    const double da = with_adapter - without_adapter;
    const double db = incremental - scratch;
    const double dc = grown - with_adapter;
    const bool pa = da >= -0.1;
    const bool pb = db >= -0.5;
    const bool pc = dc >= -1.0;
    char buf[1400];
    std::snprintf(buf, sizeof buf,
                  "Ablation (SAR:RGB PSNR, %lld steps per run)      variant A  variant B  delta   gate\n"
                  "(a) with vs without adapters                       %8.2f   %8.2f  %+6.2f  >= -0.1 %s\n"
                  "(b) incremental vs scratch, two directions         %8.2f   %8.2f  %+6.2f  >= -0.5 %s\n"
                  "(c) 14 directions (incremental) vs single          %8.2f   %8.2f  %+6.2f  >= -1.0 %s (soft)\n"
                  "    14 directions vs its %lld-step starting point     %8.2f   %8.2f  %+6.2f  (info)\n",
                  2 * kAblationHalf, with_adapter, without_adapter, da, pa ? "PASS" : "FAIL", incremental, scratch, db,
                  pb ? "PASS" : "FAIL", grown, with_adapter, dc, pc ? "PASS" : "FAIL", kAblationHalf, grown,
                  start_psnr, grown - start_psnr);
    std::cout << buf;
    io::write_text(ctx.work / "ablation_table.txt", buf);
    g.expect(pa, "(a) adapter delta " + fmt(da) + " dB below -0.1");
    g.expect(pb, "(b) incremental delta " + fmt(db) + " dB below -0.5");
    g.note("(c) soft gate delta " + fmt(dc) + " dB" + (pc ? "" : " (below -1 dB)"));
}

}  // namespace a2a::acceptance
