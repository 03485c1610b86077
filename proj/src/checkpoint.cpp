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

#include "a2a/checkpoint.hpp"

#include <sstream>

#include "a2a/io.hpp"
#include "a2a/kv.hpp"

namespace a2a {

namespace fs = std::filesystem;

namespace {

std::size_t weight_count(const std::array<std::uint32_t, 3>& f)
{
    if (f[0] == 1) return f[1];
    if (f[0] == 2) return static_cast<std::size_t>(f[1]) * f[2];
    return static_cast<std::size_t>(-1);
}

std::string shape_text(const Shape& s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(s[i]);
    }
    return out;
}

std::string join_ints(const std::vector<int>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> split_ints(const std::string& text, const std::string& what)
{
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(item, what)));
    return out;
}

void write_array(const fs::path& path, const Tensor<float>& t)
{
    std::array<std::uint32_t, 3> fields{static_cast<std::uint32_t>(t.rank()), static_cast<std::uint32_t>(t.dim(0)),
                                        t.rank() == 2 ? static_cast<std::uint32_t>(t.dim(1)) : 0U};
    io::write_array_file(path, io::kWeightMagic, fields, t.data);
}

Tensor<float> read_array(const fs::path& path, const Shape& expected)
{
    auto file = io::read_array_file(path, io::kWeightMagic, weight_count);
    Shape got;
    if (file.fields[0] == 1) {
        if (file.fields[2] != 0) fail(path.string() + ": rank-1 array with nonzero second dimension");
        got = {static_cast<int>(file.fields[1])};
    } else {
        got = {static_cast<int>(file.fields[1]), static_cast<int>(file.fields[2])};
    }
    if (got != expected) {
        fail(path.string() + ": shape " + shape_text(got) + " does not match manifest " + shape_text(expected));
    }
    Tensor<float> t(got);
    t.data = std::move(file.values);
    return t;
}

template <typename Store>
void save_store(KeyValues& kv, const fs::path& dir, const std::string& component, const Store& store)
{
    for (const auto& [name, var] : store.entries()) {
        const std::string key = component + "." + name;
        kv.set("array." + key, shape_text(var.shape()));
        write_array(dir / (key + ".f32"), var.value());
    }
}

template <typename Store>
void load_store(const KeyValues& kv, const fs::path& dir, const std::string& component, Store& store)
{
    const std::string prefix = "array." + component + ".";
    std::size_t listed = 0;
    for (const auto& [k, v] : kv.entries()) {
        if (k.rfind(prefix, 0) == 0) ++listed;
    }
    if (listed != store.entries().size()) {
        fail("checkpoint component " + component + " lists " + std::to_string(listed) + " arrays, expected " +
             std::to_string(store.entries().size()));
    }
    for (auto& [name, var] : store.entries()) {
        const std::string key = component + "." + name;
        const auto& shape_str_v = kv.at("array." + key);
        Shape want;
        std::stringstream ss(shape_str_v);
        std::string item;
        while (std::getline(ss, item, 'x')) want.push_back(static_cast<int>(parse_int(item, "array." + key)));
        if (want != var.shape()) {
            fail("manifest shape of " + key + " (" + shape_str_v + ") does not match the configured architecture (" +
                 shape_text(var.shape()) + ")");
        }
        var.mutable_value() = read_array(dir / (key + ".f32"), want);
    }
}

void save_optim(KeyValues& kv, const fs::path& dir, const std::string& group, const nn::Adam<float>& adam)
{
    kv.set("optim." + group + ".steps", std::to_string(adam.steps()));
    for (const auto& [name, slot] : adam.slots()) {
        const std::string key = "optim." + group + "." + name;
        Tensor<float> m({static_cast<int>(slot.m.size())});
        m.data = slot.m;
        Tensor<float> v({static_cast<int>(slot.v.size())});
        v.data = slot.v;
        write_array(dir / (key + ".m.f32"), m);
        write_array(dir / (key + ".v.f32"), v);
        kv.set("array." + key + ".m", shape_text(m.shape));
        kv.set("array." + key + ".v", shape_text(v.shape));
    }
}

void load_optim(const KeyValues& kv, const fs::path& dir, const std::string& group, nn::Adam<float>& adam)
{
    const auto steps = kv.find("optim." + group + ".steps");
    if (!steps) return;
    adam.set_steps(parse_int(*steps, "optim." + group + ".steps"));
    adam.slots().clear();
    const std::string prefix = "array.optim." + group + ".";
    for (const auto& [k, v] : kv.entries()) {
        if (k.rfind(prefix, 0) != 0 || k.size() < 2 || k.substr(k.size() - 2) != ".m") continue;
        const std::string name = k.substr(prefix.size(), k.size() - prefix.size() - 2);
        const std::string key = "optim." + group + "." + name;
        const Shape shape{static_cast<int>(parse_int(v, k))};
        auto& slot = adam.slots()[name];
        slot.m = read_array(dir / (key + ".m.f32"), shape).data;
        slot.v = read_array(dir / (key + ".v.f32"), shape).data;
    }
}

std::uint64_t file_digest(const fs::path& path, std::uint64_t seed)
{
    const auto bytes = io::read_text(path);
    return io::fnv1a(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()), seed);
}

}  // namespace

std::string format_directions(const DirectionSet& set)
{
    std::string out;
    for (const auto& [s, t] : set) {
        if (!out.empty()) out += ',';
        out += s + ":" + t;
    }
    return out;
}

DirectionSet parse_directions(const std::string& text)
{
    DirectionSet out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.insert(parse_direction(item));
    }
    return out;
}

std::string save_checkpoint(const Any2AnyModel& model, const fs::path& dir, const OptimizerState* optim)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
    // Drop stale arrays from a previous save with a different architecture.
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".f32") fs::remove(entry.path());
    }

    KeyValues kv;
    kv.set("format_version", std::to_string(kCheckpointVersion));
    const auto& reg = model.registry;
    kv.set("registry.count", std::to_string(reg.size()));
    for (int i = 0; i < reg.size(); ++i) {
        const auto& s = reg.spec(i);
        const std::string p = "registry." + std::to_string(i) + ".";
        kv.set(p + "name", s.name);
        kv.set(p + "channels", std::to_string(s.channels));
        kv.set(p + "native_size", std::to_string(s.native_size));
        if (s.scale_factor) kv.set("scale_factor." + s.name, format_double(*s.scale_factor));
    }
    kv.set("contract.c", std::to_string(reg.contract().c));
    kv.set("contract.h", std::to_string(reg.contract().h));
    kv.set("contract.w", std::to_string(reg.contract().w));
    kv.set("schedule.T", std::to_string(model.schedule.params.steps));
    kv.set("schedule.beta_start", format_double(model.schedule.params.beta_start));
    kv.set("schedule.beta_end", format_double(model.schedule.params.beta_end));
    kv.set("schedule.kind", "linear");
    kv.set("trained_directions", format_directions(model.trained));
    kv.set("adapters.enabled", model.adapters_enabled ? "1" : "0");
    kv.set("seed", std::to_string(model.config.seed));
    for (const auto& [k, v] : model.steps) kv.set("steps." + k, std::to_string(v));
    for (const auto& [k, v] : model.config_echo) kv.set("config." + k, v);

    const auto& bc = model.config.backbone;
    kv.set("backbone.patch", std::to_string(bc.patch));
    kv.set("backbone.width", std::to_string(bc.width));
    kv.set("backbone.depth", std::to_string(bc.depth));
    kv.set("backbone.heads", std::to_string(bc.heads));
    kv.set("backbone.mlp_ratio", std::to_string(bc.mlp_ratio));
    kv.set("backbone.time_features", std::to_string(bc.time_features));
    kv.set("backbone.embedding", bc.embedding == EmbeddingMode::kLearned ? "learned" : "fixed");
    kv.set("codec.width", std::to_string(model.config.codec_width));
    kv.set("codec.min_width", std::to_string(model.config.codec_min_width));
    kv.set("codec.reference_loss_weights", model.config.reference_loss_weights ? "1" : "0");
    for (int i = 0; i < reg.size(); ++i) {
        const auto& cc = model.codecs[static_cast<std::size_t>(i)].config();
        const std::string p = "codec." + reg.spec(i).name + ".";
        kv.set(p + "widths", join_ints(cc.widths));
        kv.set(p + "gamma", format_double(cc.gamma));
        kv.set(p + "beta_kl", format_double(cc.beta_kl));
    }
    for (const auto& [k, n] : parameter_counts(model)) kv.set("params." + k, std::to_string(n));

    for (int i = 0; i < reg.size(); ++i) {
        save_store(kv, dir, "codec." + reg.spec(i).name, model.codecs[static_cast<std::size_t>(i)].params());
    }
    save_store(kv, dir, "backbone", model.backbone.params());
    save_store(kv, dir, "adapters", model.adapters.params());
    if (optim) {
        for (const auto& [group, adam] : optim->groups) {
            if (adam) save_optim(kv, dir, group, *adam);
        }
    }

    // Digest over every array file, in sorted key order.
    std::uint64_t digest = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : kv.entries()) {
        if (k.rfind("array.", 0) == 0) digest = file_digest(dir / (k.substr(6) + ".f32"), digest);
    }
    kv.set("weights_digest", io::hex64(digest));

    const auto text = kv.serialize();
    io::write_text(dir / "manifest.txt", text);
    return io::hex64(io::fnv1a(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size())));
}

std::map<std::string, std::string> read_manifest(const fs::path& dir)
{
    const auto path = dir / "manifest.txt";
    if (!fs::exists(path)) fail("not a checkpoint (missing " + path.string() + ")");
    return KeyValues::parse(io::read_text(path), path.string()).entries();
}

Any2AnyModel load_checkpoint(const fs::path& dir, OptimizerState* optim)
{
    const auto path = dir / "manifest.txt";
    if (!fs::exists(path)) fail("not a checkpoint (missing " + path.string() + ")");
    const auto kv = KeyValues::parse(io::read_text(path), path.string());
    const auto version = kv.at_int("format_version");
    if (version != kCheckpointVersion) {
        fail(path.string() + ": unsupported format_version " + std::to_string(version));
    }

    LatentShape contract{static_cast<int>(kv.at_int("contract.c")), static_cast<int>(kv.at_int("contract.h")),
                         static_cast<int>(kv.at_int("contract.w"))};
    ModalityRegistry reg(contract);
    const auto count = kv.at_int("registry.count");
    for (long long i = 0; i < count; ++i) {
        const std::string p = "registry." + std::to_string(i) + ".";
        ModalitySpec s;
        s.name = kv.at(p + "name");
        s.channels = static_cast<int>(kv.at_int(p + "channels"));
        s.native_size = static_cast<int>(kv.at_int(p + "native_size"));
        reg.register_modality(s);
    }
    reg.freeze();

    ModelConfig cfg;
    cfg.schedule.steps = static_cast<int>(kv.at_int("schedule.T"));
    cfg.schedule.beta_start = kv.at_double("schedule.beta_start");
    cfg.schedule.beta_end = kv.at_double("schedule.beta_end");
    cfg.seed = static_cast<std::uint64_t>(std::stoull(kv.at("seed")));
    cfg.codec_width = static_cast<int>(kv.at_int("codec.width"));
    cfg.codec_min_width = static_cast<int>(kv.at_int("codec.min_width"));
    cfg.reference_loss_weights = kv.at("codec.reference_loss_weights") == "1";
    auto& bc = cfg.backbone;
    bc.patch = static_cast<int>(kv.at_int("backbone.patch"));
    bc.width = static_cast<int>(kv.at_int("backbone.width"));
    bc.depth = static_cast<int>(kv.at_int("backbone.depth"));
    bc.heads = static_cast<int>(kv.at_int("backbone.heads"));
    bc.mlp_ratio = static_cast<int>(kv.at_int("backbone.mlp_ratio"));
    bc.time_features = static_cast<int>(kv.at_int("backbone.time_features"));
    const auto& emb = kv.at("backbone.embedding");
    require(emb == "learned" || emb == "fixed", path.string() + ": unknown backbone.embedding " + emb);
    bc.embedding = emb == "learned" ? EmbeddingMode::kLearned : EmbeddingMode::kFixed;

    auto model = Any2AnyModel::create(std::move(reg), cfg);
    for (int i = 0; i < model.registry.size(); ++i) {
        const auto& name = model.registry.spec(i).name;
        const std::string p = "codec." + name + ".";
        auto cc = model.codecs[static_cast<std::size_t>(i)].config();
        cc.widths = split_ints(kv.at(p + "widths"), p + "widths");
        cc.gamma = kv.at_double(p + "gamma");
        cc.beta_kl = kv.at_double(p + "beta_kl");
        model.codecs[static_cast<std::size_t>(i)] = Codec<float>(cc, 0);
        if (auto s = kv.find("scale_factor." + name)) model.registry.set_scale_factor(i, parse_double(*s, "scale_factor." + name));
    }
    for (int i = 0; i < model.registry.size(); ++i) {
        load_store(kv, dir, "codec." + model.registry.spec(i).name, model.codecs[static_cast<std::size_t>(i)].params());
    }
    load_store(kv, dir, "backbone", model.backbone.params());
    load_store(kv, dir, "adapters", model.adapters.params());

    model.trained = parse_directions(kv.at("trained_directions"));
    for (const auto& [s, t] : model.trained) {
        model.registry.resolve_direction(s, t, {});
    }
    model.adapters_enabled = kv.at("adapters.enabled") == "1";
    for (const auto& [k, v] : kv.entries()) {
        if (k.rfind("steps.", 0) == 0) model.steps[k.substr(6)] = parse_int(v, k);
        if (k.rfind("config.", 0) == 0) model.config_echo[k.substr(7)] = v;
    }

    if (auto want = kv.find("weights_digest")) {
        std::uint64_t digest = 0xcbf29ce484222325ULL;
        for (const auto& [k, v] : kv.entries()) {
            if (k.rfind("array.", 0) == 0) digest = file_digest(dir / (k.substr(6) + ".f32"), digest);
        }
        if (io::hex64(digest) != *want) fail(path.string() + ": weight files do not match weights_digest");
    }
    if (optim) {
        for (auto& [group, adam] : optim->groups) {
            if (adam) load_optim(kv, dir, group, *adam);
        }
    }
    return model;
}

}  // namespace a2a
