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

#include "cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "a2a/checkpoint.hpp"
#include "a2a/io.hpp"
#include "a2a/kv.hpp"
#include "a2a/pipeline.hpp"
#include "a2a/synth.hpp"
#include "a2a/training.hpp"

namespace a2a::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    // shared
    std::string data;
    std::string ckpt;
    std::string out;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string log;
    // gen-data
    std::string seeds;
    std::string protocol = "seven-pair";
    int scene_size = 0;
    int base_size = 32;
    // train-vae
    std::vector<std::string> modalities;
    long long steps = 2000;
    int batch = 16;
    double lr = 1e-3;
    int codec_width = 32;
    int codec_min_width = 8;
    bool reference_weights = false;
    int log_every = 50;
    // compute-scales
    std::string preset = "estimate";
    int min_latents = 256;
    // train-dit
    std::string directions;
    double lambda = 1.0;
    bool no_adapters = false;
    bool literal_calibration = false;
    int width = 128;
    int depth = 6;
    int heads = 4;
    int patch = 2;
    int mlp_ratio = 4;
    int time_features = 64;
    std::string embedding = "learned";
    int diffusion_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    long long save_every = 0;
    // translate / evaluate
    std::string src_file;
    std::string direction;
    int sample_steps = 250;
    double eta = 0.0;
    std::size_t limit = 0;
    bool table = false;
    // report
    std::vector<std::string> reports;
    // listing
    bool list_trained = false;
    bool list_all = false;
    bool list_zero_shot = false;
    std::string echo_command;
};

void progress(const std::string& msg) { std::cerr << msg << '\n'; }

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text)
{
    const auto dots = text.find("..");
    if (dots == std::string::npos) throw UsageError("--seeds must look like A..B, got '" + text + "'");
    try {
        const auto a = std::stoull(text.substr(0, dots));
        const auto b = std::stoull(text.substr(dots + 2));
        if (a > b) throw UsageError("--seeds range is empty: " + text);
        return {a, b};
    } catch (const std::logic_error&) {
        throw UsageError("--seeds must look like A..B, got '" + text + "'");
    }
}

/// Registry described by dataset.txt, or the default registry.
ModalityRegistry dataset_registry(const fs::path& root, int base_size)
{
    const auto path = root / "dataset.txt";
    if (!fs::exists(path)) return default_registry({}, base_size);
    const auto kv = KeyValues::parse(io::read_text(path), path.string());
    ModalityRegistry reg;
    for (int i = 0;; ++i) {
        const std::string p = "modality." + std::to_string(i) + ".";
        const auto name = kv.find(p + "name");
        if (!name) break;
        reg.register_modality({*name, static_cast<int>(kv.at_int(p + "channels")),
                               static_cast<int>(kv.at_int(p + "native_size")), std::nullopt});
    }
    if (reg.size() == 0) return default_registry({}, base_size);
    return reg;
}

/// Flag values of a subcommand as "key=value" pairs (long names, defaults
/// included), in the same syntax the --config file accepts.
std::map<std::string, std::string> echo_options(const CLI::App& sub)
{
    std::map<std::string, std::string> out;
    for (const CLI::Option* opt : sub.get_options()) {
        const auto& names = opt->get_lnames();
        if (names.empty() || names.front() == "help" || names.front() == "config") continue;
        std::string value;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
        } else if (opt->get_type_size() == 0) {
            value = "false";
        } else {
            value = opt->get_default_str();
        }
        out[names.front()] = value;
    }
    return out;
}

void record_echo(Any2AnyModel& model, const CLI::App& sub)
{
    const std::string prefix = sub.get_name() + ".";
    for (auto it = model.config_echo.begin(); it != model.config_echo.end();) {
        it = it->first.rfind(prefix, 0) == 0 ? model.config_echo.erase(it) : std::next(it);
    }
    for (const auto& [k, v] : echo_options(sub)) model.config_echo[prefix + k] = v;
}

DirectionSet resolve_direction_list(const std::string& text, const ModalityRegistry& reg,
                                    const PairedDataset* data)
{
    DirectionSet out;
    if (text.empty() || text == "available") {
        require(data != nullptr, "direction list 'available' needs a dataset");
        out = data->available_directions();
    } else if (text.rfind("protocol:", 0) == 0) {
        out = protocol_directions(protocol_by_name(text.substr(9), reg));
    } else {
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            out.insert(parse_direction(item));
        }
    }
    for (const auto& [s, t] : out) {
        if (!reg.contains(s) || !reg.contains(t)) throw UsageError("unknown modality in direction " + s + ":" + t);
        reg.resolve_direction(s, t, {});
    }
    if (out.empty()) throw UsageError("empty direction list");
    return out;
}

std::vector<TranslationDirection> evaluation_directions(const std::string& text, const Any2AnyModel& model)
{
    const auto& reg = model.registry;
    if (text == "all") return reg.list_directions(model.trained, DirectionFilter::kAll);
    if (text == "trained") return reg.list_directions(model.trained, DirectionFilter::kTrained);
    if (text == "zero-shot") return reg.list_directions(model.trained, DirectionFilter::kZeroShot);
    std::vector<TranslationDirection> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto [s, t] = parse_direction(item);
        if (!reg.contains(s) || !reg.contains(t)) throw UsageError("unknown modality in direction " + item);
        out.push_back(reg.resolve_direction(s, t, model.trained));
    }
    if (out.empty()) throw UsageError("no directions given");
    return out;
}

class JsonLog {
public:
    explicit JsonLog(const std::string& path)
    {
        if (!path.empty()) {
            file_.open(path, std::ios::app);
            if (!file_) fail("cannot open log file " + path);
        }
    }
    void write(const std::string& line)
    {
        if (file_.is_open()) file_ << line << '\n';
        else std::cout << line << '\n';
    }

private:
    std::ofstream file_;
};

// ------------------------------------------------------------ commands

int cmd_gen_data(const Options& o)
{
    const auto [a, b] = parse_seed_range(o.seeds);
    auto reg = default_registry({}, o.base_size);
    reg.freeze();
    const auto man = make_paired_dataset(a, b, o.protocol, reg, o.out, o.scene_size);
    std::cout << "rows=" << man.rows << " files=" << man.files << " out=" << o.out << '\n';
    return 0;
}

Any2AnyModel open_or_create(const Options& o)
{
    if (fs::exists(fs::path(o.ckpt) / "manifest.txt")) return load_checkpoint(o.ckpt);
    ModelConfig mc;
    mc.codec_width = o.codec_width;
    mc.codec_min_width = o.codec_min_width;
    mc.reference_loss_weights = o.reference_weights;
    mc.seed = o.seed;
    progress("creating checkpoint " + o.ckpt);
    return Any2AnyModel::create(dataset_registry(o.data, o.base_size), mc);
}

int cmd_train_vae(const Options& o, const CLI::App& sub)
{
    auto model = open_or_create(o);
    const auto data = PairedDataset::ingest(o.data, model.registry);
    auto names = o.modalities;
    if (names.empty()) {
        for (const auto& s : model.registry.specs()) names.push_back(s.name);
    }
    JsonLog log(o.log);
    for (const auto& name : names) {
        if (!model.registry.contains(name)) throw UsageError("unknown modality " + name);
        const auto keys = data.modality_images(name);
        if (keys.empty()) fail("dataset has no " + name + " images");
        VaeTrainConfig vc;
        vc.steps = o.steps;
        vc.batch = o.batch;
        vc.lr = o.lr;
        vc.seed = o.seed;
        progress("training codec " + name + " on " + std::to_string(keys.size()) + " images");
        const auto r = train_vae(model.codec(name), data.stack(keys), vc, [&](const VaeStepReport& s) {
            if (o.log_every > 0 && (s.step % o.log_every == 0 || s.step == vc.steps)) {
                nlohmann::json j{{"modality", name},       {"step", s.step},          {"rec", s.loss.rec},
                                 {"perceptual", s.loss.perceptual}, {"kl", s.loss.kl}, {"total", s.loss.total},
                                 {"grad_norm", s.grad_norm}, {"wall_ms", s.wall_ms}};
                log.write(j.dump());
            }
        });
        model.steps["vae." + name] += o.steps;
        // New codec weights invalidate any previous scale factor.
        progress(name + " round-trip PSNR " + std::to_string(r.psnr) + " dB");
        std::cout << "{\"modality\":\"" << name << "\",\"roundtrip_psnr\":" << r.psnr << "}\n";
    }
    record_echo(model, sub);
    save_checkpoint(model, o.ckpt);
    return 0;
}

int cmd_compute_scales(const Options& o, const CLI::App& sub)
{
    auto model = load_checkpoint(o.ckpt);
    if (o.preset == "reference") {
        for (const auto& [name, s] : reference_scale_factors()) {
            if (model.registry.contains(name)) model.registry.set_scale_factor(model.registry.id_of(name), s);
        }
    } else if (o.preset == "estimate") {
        if (o.data.empty()) throw UsageError("--data is required with --preset estimate");
        const auto data = PairedDataset::ingest(o.data, model.registry);
        for (int i = 0; i < model.registry.size(); ++i) {
            const auto& name = model.registry.spec(i).name;
            const auto keys = data.modality_images(name);
            if (keys.empty()) fail("dataset has no " + name + " images to estimate a scale from");
            const auto latents = encode_means(model.codecs[static_cast<std::size_t>(i)], data.stack(keys));
            model.registry.set_scale_factor(i, estimate_scale(latents, static_cast<std::size_t>(o.min_latents)));
        }
    } else {
        throw UsageError("--preset must be estimate or reference");
    }
    for (const auto& s : model.registry.specs()) {
        std::cout << "scale_factor." << s.name << "=" << (s.scale_factor ? format_double(*s.scale_factor) : "UNSET") << '\n';
    }
    record_echo(model, sub);
    save_checkpoint(model, o.ckpt);
    return 0;
}

int cmd_train_dit(const Options& o, const CLI::App& sub)
{
    nn::Adam<float> bb_state;
    nn::Adam<float> ad_state;
    OptimizerState loaded;
    loaded.groups["backbone"] = &bb_state;
    loaded.groups["adapters"] = &ad_state;
    auto model = load_checkpoint(o.ckpt, &loaded);
    if (model.step_count("stage2") == 0) {
        BackboneConfig bc;
        bc.width = o.width;
        bc.depth = o.depth;
        bc.heads = o.heads;
        bc.patch = o.patch;
        bc.mlp_ratio = o.mlp_ratio;
        bc.time_features = o.time_features;
        if (o.embedding != "learned" && o.embedding != "fixed") throw UsageError("--embedding must be learned or fixed");
        bc.embedding = o.embedding == "learned" ? EmbeddingMode::kLearned : EmbeddingMode::kFixed;
        model.config.schedule = {o.diffusion_steps, o.beta_start, o.beta_end};
        model.schedule = build_schedule(model.config.schedule);
        model.reset_backbone(bc);
        model.trained.clear();
    } else {
        progress("resuming from stage-II step " + std::to_string(model.step_count("stage2")) +
                 "; architecture flags are ignored");
    }
    model.adapters_enabled = !o.no_adapters;
    const auto data = PairedDataset::ingest(o.data, model.registry);
    const auto dirs = resolve_direction_list(o.directions, model.registry, &data);

    Stage2Config sc;
    sc.lr = o.lr;
    sc.batch = o.batch;
    sc.lambda = o.lambda;
    sc.seed = o.seed;
    sc.literal_calibration = o.literal_calibration;
    Stage2Trainer trainer(model, data, sc);
    if (bb_state.steps() > 0) {
        trainer.backbone_optimizer().slots() = bb_state.slots();
        trainer.backbone_optimizer().set_steps(bb_state.steps());
        trainer.adapter_optimizer().slots() = ad_state.slots();
        trainer.adapter_optimizer().set_steps(ad_state.steps());
    }
    trainer.extend_directions(dirs);
    progress("training on " + std::to_string(model.trained.size()) + " directions: " + format_directions(model.trained));
    record_echo(model, sub);
    JsonLog log(o.log);
    for (long long i = 0; i < o.steps; ++i) {
        const auto r = trainer.step();
        if (o.log_every > 0 && ((i + 1) % o.log_every == 0 || i + 1 == o.steps)) log.write(step_report_json(r));
        if (o.save_every > 0 && (i + 1) % o.save_every == 0) {
            const auto state = trainer.optimizer_state();
            save_checkpoint(model, o.ckpt, &state);
        }
    }
    const auto state = trainer.optimizer_state();
    const auto digest = save_checkpoint(model, o.ckpt, &state);
    progress("saved " + o.ckpt + " (manifest " + digest + ")");
    return 0;
}

SampleConfig sample_config(const Options& o)
{
    SampleConfig sc;
    sc.steps = o.sample_steps;
    sc.eta = o.eta;
    sc.seed = o.seed;
    sc.batch = o.batch;
    return sc;
}

int cmd_translate(const Options& o)
{
    const auto model = load_checkpoint(o.ckpt);
    require(model.scales_ready(), "checkpoint has no scale factors (run compute-scales)");
    const auto [s, t] = parse_direction(o.direction);
    if (!model.registry.contains(s) || !model.registry.contains(t)) throw UsageError("unknown modality in " + o.direction);
    const auto dir = model.registry.resolve_direction(s, t, model.trained);
    auto img = io::read_image(o.src_file);
    const auto& spec = model.registry.spec(s);
    const Shape want{spec.channels, spec.native_size, spec.native_size};
    if (img.shape != want) {
        fail(o.src_file + ": shape " + shape_str(img.shape) + " does not match " + s + " " + shape_str(want));
    }
    img.shape.insert(img.shape.begin(), 1);
    Translator tr(model);
    auto out = tr.translate(img, dir, sample_config(o));
    out.shape.erase(out.shape.begin());
    io::write_image(o.out, out);
    std::cout << "{\"direction\":\"" << dir.label() << "\",\"status\":\"" << to_string(dir.status) << "\",\"out\":\""
              << o.out << "\"}\n";
    return 0;
}

int cmd_evaluate(const Options& o)
{
    const auto model = load_checkpoint(o.ckpt);
    require(model.scales_ready(), "checkpoint has no scale factors (run compute-scales)");
    const auto data = PairedDataset::ingest(o.data, model.registry);
    std::vector<MetricsReport> reports;
    for (const auto& dir : evaluation_directions(o.direction, model)) {
        progress("evaluating " + dir.label());
        reports.push_back(evaluate_direction(model, data, dir, sample_config(o), o.limit));
    }
    const auto json = report_to_json(reports);
    if (o.out.empty()) std::cout << json;
    else io::write_text(o.out, json);
    if (o.table) std::cerr << report_table(reports);
    return 0;
}

int cmd_report(const Options& o)
{
    std::vector<MetricsReport> merged;
    for (const auto& f : o.reports) {
        for (auto& r : reports_from_json(io::read_text(f))) merged.push_back(std::move(r));
    }
    std::cout << report_table(merged);
    if (!o.out.empty()) io::write_text(o.out, report_to_json(merged));
    return 0;
}

ModalityRegistry listing_registry(const Options& o, DirectionSet* trained)
{
    if (!o.ckpt.empty()) {
        auto model = load_checkpoint(o.ckpt);
        if (trained) *trained = model.trained;
        return model.registry;
    }
    return default_registry({}, o.base_size);
}

int cmd_list_modalities(const Options& o)
{
    const auto reg = listing_registry(o, nullptr);
    for (int i = 0; i < reg.size(); ++i) {
        const auto& s = reg.spec(i);
        std::cout << i << '\t' << s.name << '\t' << s.channels << '\t' << s.native_size << '\t'
                  << (s.scale_factor ? format_double(*s.scale_factor) : "UNSET") << '\n';
    }
    return 0;
}

int cmd_list_directions(const Options& o)
{
    DirectionSet trained;
    const auto reg = listing_registry(o, &trained);
    const int picked = int(o.list_all) + int(o.list_trained) + int(o.list_zero_shot);
    if (picked > 1) throw UsageError("choose one of --all, --trained, --zero-shot");
    const auto filter = o.list_trained ? DirectionFilter::kTrained
                        : o.list_zero_shot ? DirectionFilter::kZeroShot
                                           : DirectionFilter::kAll;
    for (const auto& d : reg.list_directions(trained, filter)) {
        std::cout << d.label() << '\t' << to_string(d.status) << '\n';
    }
    return 0;
}

int cmd_inspect(const Options& o)
{
    const auto manifest = read_manifest(o.ckpt);
    if (!o.echo_command.empty()) {
        const std::string prefix = "config." + o.echo_command + ".";
        bool any = false;
        for (const auto& [k, v] : manifest) {
            if (k.rfind(prefix, 0) == 0) {
                std::cout << k.substr(prefix.size()) << '=' << v << '\n';
                any = true;
            }
        }
        if (!any) fail("checkpoint has no configuration echo for " + o.echo_command);
        return 0;
    }
    for (const auto& [k, v] : manifest) {
        if (k.rfind("array.", 0) == 0) continue;
        std::cout << k << '=' << v << '\n';
    }
    return 0;
}

/// Splices the entries of a subcommand's --config file into the argument
/// list. Keys given on the command line win; empty values and false flags
/// leave the option at its default.
std::vector<std::string> expand_config_args(const CLI::App& app, int argc, const char* const* argv)
{
    std::vector<std::string> args(argv, argv + argc);
    std::size_t sub_pos = 0;
    const CLI::App* sub = nullptr;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i].rfind("-", 0) == 0) continue;
        try {
            sub = app.get_subcommand(args[i]);
            sub_pos = i;
        } catch (const CLI::OptionNotFound&) {
        }
        break;
    }
    if (sub == nullptr) return args;

    std::string file;
    std::vector<std::string> given;
    for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
        const auto& a = args[i];
        if (a.rfind("--", 0) != 0) continue;
        const auto eq = a.find('=');
        const std::string key = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
        if (key == "config") {
            if (eq != std::string::npos) {
                file = a.substr(eq + 1);
            } else if (i + 1 < args.size()) {
                file = args[i + 1];
            }
        }
        given.push_back(key);
    }
    if (file.empty()) return args;

    std::ifstream in(file);
    if (!in) throw UsageError("cannot read config file " + file);
    auto trim = [](std::string t) {
        const auto b = t.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        const auto e = t.find_last_not_of(" \t\r");
        t = t.substr(b, e - b + 1);
        if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) {
            t = t.substr(1, t.size() - 2);
        }
        return t;
    };
    std::vector<std::string> extra;
    std::vector<std::string> positional;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw UsageError(file + ":" + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const CLI::Option* opt = nullptr;
        for (const CLI::Option* o : sub->get_options()) {
            const auto& names = o->get_lnames();
            if (std::find(names.begin(), names.end(), key) != names.end() || o->get_name() == key) opt = o;
        }
        if (opt == nullptr || key == "config" || key == "help") {
            throw UsageError(file + ":" + std::to_string(lineno) + ": unknown key '" + key + "' for " +
                             sub->get_name());
        }
        if (std::find(given.begin(), given.end(), key) != given.end() || value.empty() || value == "[]") continue;
        if (opt->get_lnames().empty()) {
            if (opt->count() == 0 && std::none_of(args.begin() + sub_pos + 1, args.end(),
                                                  [](const std::string& a) { return a.rfind("-", 0) != 0; })) {
                std::stringstream ss(value);
                for (std::string item; std::getline(ss, item, ',');) positional.push_back(item);
            }
            continue;
        }
        if (opt->get_type_size() == 0) {
            if (value == "true" || value == "1") extra.push_back("--" + key);
            continue;
        }
        extra.push_back("--" + key + "=" + value);
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, extra.begin(), extra.end());
    args.insert(args.end(), positional.begin(), positional.end());
    return args;
}

}  // namespace

int run(int argc, const char* const* argv)
{
    Options o;
    CLI::App app{"Any-to-any modality translation with a shared latent diffusion backbone"};
    app.name("a2a");
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.add_option("--workers", o.workers, "Worker threads for kernels")->check(CLI::PositiveNumber);

    std::string config_sink;
    auto with_config = [&config_sink](CLI::App* sub) {
        sub->add_option("--config", config_sink, "key=value file; command-line flags override its values");
    };

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic paired dataset");
    with_config(gen);
    gen->add_option("--seeds", o.seeds, "Scene seed range A..B (inclusive)")->required();
    gen->add_option("--protocol", o.protocol, "seven-pair or all-pairs");
    gen->add_option("--out", o.out, "Output directory")->required();
    gen->add_option("--scene-size", o.scene_size, "Scene resolution (0: largest native size)");
    gen->add_option("--base-size", o.base_size, "RGB/NIR/SAR native size");

    auto* vae = app.add_subcommand("train-vae", "Stage I: train per-modality codecs");
    with_config(vae);
    vae->add_option("--data", o.data, "Dataset directory")->required();
    vae->add_option("--ckpt", o.ckpt, "Checkpoint directory (created if missing)")->required();
    vae->add_option("--modality", o.modalities, "Modalities to train (default: all)")->delimiter(',');
    vae->add_option("--steps", o.steps, "Optimizer steps per codec");
    vae->add_option("--batch", o.batch, "Batch size");
    vae->add_option("--lr", o.lr, "Learning rate");
    vae->add_option("--seed", o.seed, "Seed");
    vae->add_option("--codec-width", o.codec_width, "Codec width at the latent level (new checkpoints)");
    vae->add_option("--codec-min-width", o.codec_min_width, "Minimum codec width (new checkpoints)");
    vae->add_flag("--reference-weights", o.reference_weights, "Loss-weight preset gamma_RGB=1, beta=1e-5");
    vae->add_option("--base-size", o.base_size, "Native size when the dataset has no dataset.txt");
    vae->add_option("--log", o.log, "JSON-lines log file (default stdout)");
    vae->add_option("--log-every", o.log_every, "Log every N steps");

    auto* scales = app.add_subcommand("compute-scales", "Estimate per-modality latent scale factors");
    with_config(scales);
    scales->add_option("--ckpt", o.ckpt, "Checkpoint directory")->required();
    scales->add_option("--data", o.data, "Dataset directory");
    scales->add_option("--preset", o.preset, "estimate or reference");
    scales->add_option("--min-latents", o.min_latents, "Minimum latents per modality");

    auto* dit = app.add_subcommand("train-dit", "Stage II: train the shared backbone and adapters");
    with_config(dit);
    dit->add_option("--data", o.data, "Dataset directory")->required();
    dit->add_option("--ckpt", o.ckpt, "Checkpoint directory")->required();
    dit->add_option("--directions", o.directions,
                    "SRC:TGT list, protocol:NAME, or 'available'; added to the trained set");
    dit->add_option("--steps", o.steps, "Optimizer steps");
    dit->add_option("--batch", o.batch, "Batch size");
    dit->add_option("--lr", o.lr, "Learning rate");
    dit->add_option("--lambda", o.lambda, "Calibration loss weight");
    dit->add_option("--seed", o.seed, "Seed");
    dit->add_flag("--no-adapters", o.no_adapters, "Disable the calibration adapters");
    dit->add_flag("--literal-calibration", o.literal_calibration, "Keep the leading z_hat attached in L_calib");
    dit->add_option("--width", o.width, "Backbone width (fresh backbones)");
    dit->add_option("--depth", o.depth, "Backbone depth (fresh backbones)");
    dit->add_option("--heads", o.heads, "Attention heads (fresh backbones)");
    dit->add_option("--patch", o.patch, "Patch size (fresh backbones)");
    dit->add_option("--mlp-ratio", o.mlp_ratio, "Feed-forward expansion (fresh backbones)");
    dit->add_option("--time-features", o.time_features, "Sinusoidal timestep features (fresh backbones)");
    dit->add_option("--embedding", o.embedding, "learned or fixed modality embeddings (fresh backbones)");
    dit->add_option("--diffusion-steps", o.diffusion_steps, "Diffusion steps T (fresh backbones)");
    dit->add_option("--beta-start", o.beta_start, "First beta (fresh backbones)");
    dit->add_option("--beta-end", o.beta_end, "Last beta (fresh backbones)");
    dit->add_option("--log", o.log, "JSON-lines log file (default stdout)");
    dit->add_option("--log-every", o.log_every, "Log every N steps");
    dit->add_option("--save-every", o.save_every, "Checkpoint every N steps (0: only at the end)");

    auto* tr = app.add_subcommand("translate", "Translate one .img file");
    with_config(tr);
    tr->add_option("--src-file", o.src_file, "Source .img file")->required();
    tr->add_option("--direction", o.direction, "SRC:TGT")->required();
    tr->add_option("--ckpt", o.ckpt, "Checkpoint directory")->required();
    tr->add_option("--steps", o.sample_steps, "Sampling steps");
    tr->add_option("--eta", o.eta, "DDIM eta");
    tr->add_option("--seed", o.seed, "Seed of the initial noise");
    tr->add_option("--out", o.out, "Output .img file")->required();

    auto* ev = app.add_subcommand("evaluate", "Score translations against paired ground truth");
    with_config(ev);
    ev->add_option("--data", o.data, "Test dataset directory")->required();
    ev->add_option("--direction", o.direction, "SRC:TGT list, or all / trained / zero-shot")->required();
    ev->add_option("--ckpt", o.ckpt, "Checkpoint directory")->required();
    ev->add_option("--steps", o.sample_steps, "Sampling steps");
    ev->add_option("--eta", o.eta, "DDIM eta");
    ev->add_option("--seed", o.seed, "Seed of the initial noise");
    ev->add_option("--batch", o.batch, "Examples per backbone call");
    ev->add_option("--limit", o.limit, "Maximum pairs per direction (0: all)");
    ev->add_option("--out", o.out, "Report JSON file (default stdout)");
    ev->add_flag("--table", o.table, "Also print a table to stderr");

    auto* rep = app.add_subcommand("report", "Merge report JSON files into one table");
    with_config(rep);
    rep->add_option("reports", o.reports, "Report JSON files")->required();
    rep->add_option("--out", o.out, "Write the merged JSON here");

    auto* lm = app.add_subcommand("list-modalities", "List registered modalities");
    with_config(lm);
    lm->add_option("--ckpt", o.ckpt, "Checkpoint directory (default: built-in registry)");
    lm->add_option("--base-size", o.base_size, "Native size of the built-in registry");

    auto* ld = app.add_subcommand("list-directions", "List translation directions");
    with_config(ld);
    ld->add_option("--ckpt", o.ckpt, "Checkpoint directory (default: built-in registry)");
    ld->add_flag("--all", o.list_all, "Every direction (default)");
    ld->add_flag("--trained", o.list_trained, "Trained directions only");
    ld->add_flag("--zero-shot", o.list_zero_shot, "Zero-shot directions only");
    ld->add_option("--base-size", o.base_size, "Native size of the built-in registry");

    auto* ins = app.add_subcommand("inspect-checkpoint", "Print a checkpoint manifest");
    with_config(ins);
    ins->add_option("--ckpt", o.ckpt, "Checkpoint directory")->required();
    ins->add_option("--echo-config", o.echo_command, "Print the recorded configuration of a command");

    std::vector<std::string> args;
    try {
        args = expand_config_args(app, argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::vector<const char*> args_c;
    for (const auto& a : args) args_c.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(args_c.size()), args_c.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        const auto* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << active->help();
        return 1;
    }

    omp_set_num_threads(o.workers);
    CLI::App* sub = app.get_subcommands().front();
    const auto& name = sub->get_name();
    try {
        if (name == "gen-data") return cmd_gen_data(o);
        if (name == "train-vae") return cmd_train_vae(o, *sub);
        if (name == "compute-scales") return cmd_compute_scales(o, *sub);
        if (name == "train-dit") return cmd_train_dit(o, *sub);
        if (name == "translate") return cmd_translate(o);
        if (name == "evaluate") return cmd_evaluate(o);
        if (name == "report") return cmd_report(o);
        if (name == "list-modalities") return cmd_list_modalities(o);
        if (name == "list-directions") return cmd_list_directions(o);
        if (name == "inspect-checkpoint") return cmd_inspect(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n' << sub->help();
        return 1;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& c : msg) {
            if (c == '\n' || c == '\r') c = ' ';
        }
        std::cerr << "A2A-ERR: " << msg << '\n';
        return 2;
    }
    return 1;
}

}  // namespace a2a::cli
