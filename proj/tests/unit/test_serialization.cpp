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

#include <cstring>
#include <fstream>

#include "a2a/checkpoint.hpp"
#include "a2a/io.hpp"
#include "a2a/kv.hpp"
#include "a2a/pipeline.hpp"
#include "fixtures.hpp"

using namespace a2a;

namespace {

void perturb(nn::ParamStore<float>& store, std::uint64_t seed)
{
    Rng rng(seed, 4);
    for (auto& [name, p] : store.entries())
        for (auto& v : p.mutable_value().data) v = static_cast<float>(0.1 * rng.normal());
}

Any2AnyModel trained_looking_model()
{
    auto m = test::tiny_model();
    m.registry.set_scale_factor(m.registry.id_of("SAR"), 0.8125);
    m.registry.set_scale_factor(m.registry.id_of("PAN"), 1.0 / 3.0);
    perturb(m.backbone.params(), 1);
    perturb(m.adapters.params(), 2);
    perturb(m.codec("MS").params(), 3);
    m.trained = {{"SAR", "RGB"}, {"RGB", "SAR"}, {"NIR", "MS"}};
    m.steps["stage2"] = 42;
    m.steps["vae.SAR"] = 7;
    m.config_echo["train-dit.lr"] = "0.0001";
    return m;
}

template <typename Store>
void check_same_params(const Store& a, const Store& b)
{
    REQUIRE(a.entries().size() == b.entries().size());
    for (std::size_t i = 0; i < a.entries().size(); ++i) {
        CHECK(a.entries()[i].first == b.entries()[i].first);
        CHECK(test::bitwise_equal(a.entries()[i].second.value(), b.entries()[i].second.value()));
    }
}

void edit_manifest(const std::filesystem::path& dir, const std::string& key, const std::string& value)
{
    auto kv = KeyValues::parse(io::read_text(dir / "manifest.txt"));
    kv.set(key, value);
    io::write_text(dir / "manifest.txt", kv.serialize());
}

}  // namespace

TEST_CASE("FNV-1a 64 reference vectors")
{
    auto h = [](const std::string& s) {
        return io::fnv1a(std::span(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
    };
    CHECK(h("") == 0xcbf29ce484222325ULL);
    CHECK(h("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(h("foobar") == 0x85944171f73967e8ULL);
    CHECK(io::hex64(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
    CHECK(io::hex64(1) == "0000000000000001");
}

TEST_CASE("key-value text")
{
    const auto kv = KeyValues::parse("# comment\n\nb=2\na = x=y\nc=3.5\n");
    CHECK(kv.at("a ") == " x=y");
    CHECK(kv.at_int("b") == 2);
    CHECK(kv.at_double("c") == 3.5);
    CHECK_FALSE(kv.find("zz").has_value());
    CHECK(kv.serialize() == "a = x=y\nb=2\nc=3.5\n");
    CHECK(KeyValues::parse(kv.serialize()).entries() == kv.entries());
    CHECK_THROWS_AS(kv.at("missing"), Error);
    CHECK_THROWS_AS(kv.at_int("a"), Error);
    CHECK_THROWS_AS(KeyValues::parse("novalue\n"), Error);
    CHECK_THROWS_AS(KeyValues::parse("a=1\na=2\n"), Error);
    CHECK_THROWS_AS(parse_int("12x", "n"), Error);
    CHECK_THROWS_AS(parse_double("", "x"), Error);
}

TEST_CASE("format_double round-trips exactly")
{
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform_int(-30, 30));
        CHECK(parse_double(format_double(v), "v") == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.5) == "2.5");
}

TEST_CASE("image files")
{
    test::TempDir dir("img");
    Rng rng(1);
    const auto img = test::random_tensor<float>({3, 5, 7}, rng);
    io::write_image(dir / "x.img", img);
    CHECK(std::filesystem::file_size(dir / "x.img") == io::kHeaderBytes + 3 * 5 * 7 * 4);
    CHECK(test::bitwise_equal(io::read_image(dir / "x.img"), img));

    // Header layout: magic, then little-endian (C, H, W).
    std::ifstream in(dir / "x.img", std::ios::binary);
    char head[16];
    in.read(head, 16);
    CHECK(std::string(head, 4) == "A2AI");
    std::uint32_t f[3];
    std::memcpy(f, head + 4, 12);
    CHECK(f[0] == 3);
    CHECK(f[1] == 5);
    CHECK(f[2] == 7);

    SUBCASE("wrong magic names the file")
    {
        const std::vector<float> v(4, 0.0f);
        io::write_array_file(dir / "w.img", io::kWeightMagic, {1, 4, 0}, v);
        try {
            io::read_image(dir / "w.img");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("w.img") != std::string::npos);
        }
    }
    SUBCASE("truncated file")
    {
        std::filesystem::resize_file(dir / "x.img", 40);
        CHECK_THROWS_AS(io::read_image(dir / "x.img"), Error);
    }
    SUBCASE("trailing bytes")
    {
        std::ofstream(dir / "x.img", std::ios::binary | std::ios::app) << "junk";
        CHECK_THROWS_AS(io::read_image(dir / "x.img"), Error);
    }
    SUBCASE("missing file")
    {
        CHECK_THROWS_AS(io::read_image(dir / "none.img"), Error);
    }
}

TEST_CASE("direction lists")
{
    const DirectionSet s{{"SAR", "RGB"}, {"MS", "NIR"}};
    CHECK(format_directions(s) == "MS:NIR,SAR:RGB");
    CHECK(parse_directions(format_directions(s)) == s);
    CHECK(parse_directions("").empty());
    CHECK_THROWS_AS(parse_directions("SAR-RGB"), Error);
}

TEST_CASE("checkpoint round trip restores the whole model")
{
    test::TempDir dir("ckpt");
    const auto m = trained_looking_model();
    const auto digest = save_checkpoint(m, dir.path());
    CHECK(digest == io::hex64(io::fnv1a(std::span(reinterpret_cast<const unsigned char*>(io::read_text(dir / "manifest.txt").data()),
                                                   io::read_text(dir / "manifest.txt").size()))));

    const auto back = load_checkpoint(dir.path());
    CHECK(back.registry.size() == m.registry.size());
    CHECK(back.registry.contract() == m.registry.contract());
    for (int i = 0; i < m.registry.size(); ++i) {
        CHECK(back.registry.spec(i).name == m.registry.spec(i).name);
        CHECK(back.registry.spec(i).scale_factor == m.registry.spec(i).scale_factor);
        check_same_params(back.codecs[i].params(), m.codecs[i].params());
    }
    check_same_params(back.backbone.params(), m.backbone.params());
    check_same_params(back.adapters.params(), m.adapters.params());
    CHECK(back.trained == m.trained);
    CHECK(back.steps == m.steps);
    CHECK(back.config_echo == m.config_echo);
    CHECK(back.adapters_enabled);
    CHECK(back.schedule.params.steps == 1000);
    CHECK(back.config.backbone.width == m.config.backbone.width);

    // Saving the reloaded model reproduces the manifest exactly.
    test::TempDir again("ckpt2");
    CHECK(save_checkpoint(back, again.path()) == digest);

    // Translations from the reloaded model are identical.
    const auto dir2 = back.registry.resolve_direction("SAR", "RGB", back.trained);
    Rng rng(5);
    const auto src = test::uniform_tensor<float>({2, 1, 8, 8}, rng, -1, 1);
    SampleConfig cfg;
    cfg.steps = 3;
    Translator t1(m), t2(back);
    CHECK(test::bitwise_equal(t1.translate(src, dir2, cfg), t2.translate(src, dir2, cfg)));
}

TEST_CASE("checkpoint manifest contents")
{
    test::TempDir dir("man");
    auto m = trained_looking_model();
    m.adapters_enabled = false;
    save_checkpoint(m, dir.path());
    const auto man = read_manifest(dir.path());
    CHECK(man.at("format_version") == "1");
    CHECK(man.at("registry.count") == "5");
    CHECK(man.at("registry.4.name") == "PAN");
    CHECK(man.at("scale_factor.SAR") == "0.8125");
    CHECK(parse_double(man.at("scale_factor.PAN"), "s") == 1.0 / 3.0);
    CHECK(man.at("trained_directions") == "NIR:MS,RGB:SAR,SAR:RGB");
    CHECK(man.at("adapters.enabled") == "0");
    CHECK(man.at("steps.stage2") == "42");
    CHECK(man.at("config.train-dit.lr") == "0.0001");
    CHECK(man.at("schedule.kind") == "linear");
    CHECK(man.at("array.backbone.patch.w") == "32x16");
    CHECK(man.at("array.backbone.patch.b") == "16");
    CHECK(std::stoull(man.at("params.backbone")) == backbone_param_count(m.config.backbone));
    CHECK(std::filesystem::exists(dir / "backbone.patch.w.f32"));
    CHECK_FALSE(load_checkpoint(dir.path()).adapters_enabled);
}

TEST_CASE("optimizer state round trip")
{
    test::TempDir dir("opt");
    const auto m = trained_looking_model();
    nn::Adam<float> a({1e-3, 0.9, 0.999, 1e-8, 1.0});
    auto store = m.backbone.params();
    // One real step populates the moments.
    Rng rng(1);
    for (auto& [name, p] : store.entries()) {
        auto& g = p.node()->grad_buffer();
        for (auto& v : g) v = static_cast<float>(rng.normal());
    }
    a.step(store);
    OptimizerState st;
    st.groups["backbone"] = &a;
    save_checkpoint(m, dir.path(), &st);
    nn::Adam<float> b;
    OptimizerState restore;
    restore.groups["backbone"] = &b;
    load_checkpoint(dir.path(), &restore);
    CHECK(b.steps() == 1);
    REQUIRE(b.slots().size() == a.slots().size());
    for (const auto& [name, slot] : a.slots()) {
        CHECK(b.slots().at(name).m == slot.m);
        CHECK(b.slots().at(name).v == slot.v);
    }
}

TEST_CASE("checkpoint validation")
{
    test::TempDir dir("bad");
    const auto m = trained_looking_model();
    save_checkpoint(m, dir.path());

    SUBCASE("missing manifest")
    {
        std::filesystem::remove(dir / "manifest.txt");
        CHECK_THROWS_AS(load_checkpoint(dir.path()), Error);
        CHECK_THROWS_AS(read_manifest(dir.path()), Error);
    }
    SUBCASE("unsupported version")
    {
        edit_manifest(dir.path(), "format_version", "2");
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.path()), doctest::Contains("format_version"), Error);
    }
    SUBCASE("tampered weights fail the digest")
    {
        auto t = io::read_array_file(dir / "backbone.cond.fc1.b.f32", io::kWeightMagic,
                                     [](const std::array<std::uint32_t, 3>& f) -> std::size_t { return f[1]; });
        t.values[0] += 1.0f;
        io::write_array_file(dir / "backbone.cond.fc1.b.f32", io::kWeightMagic, t.fields, t.values);
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.path()), doctest::Contains("weights_digest"), Error);
    }
    SUBCASE("array shape disagrees with the manifest")
    {
        const std::vector<float> v(15, 0.0f);
        io::write_array_file(dir / "adapters.0.conv1.b.f32", io::kWeightMagic, {1, 15, 0}, v);
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.path()), doctest::Contains("adapters.0.conv1.b.f32"), Error);
    }
    SUBCASE("rank-1 arrays need a zero second dimension")
    {
        const std::vector<float> v(8, 0.0f);
        io::write_array_file(dir / "adapters.0.conv1.b.f32", io::kWeightMagic, {1, 8, 3}, v);
        CHECK_THROWS_AS(load_checkpoint(dir.path()), Error);
    }
    SUBCASE("architecture disagrees with the arrays")
    {
        edit_manifest(dir.path(), "backbone.mlp_ratio", "3");
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.path()), doctest::Contains("architecture"), Error);
    }
    SUBCASE("missing weight file")
    {
        std::filesystem::remove(dir / "backbone.final.head.w.f32");
        CHECK_THROWS_AS(load_checkpoint(dir.path()), Error);
    }
    SUBCASE("trained direction outside the registry")
    {
        edit_manifest(dir.path(), "trained_directions", "SAR:LIDAR");
        CHECK_THROWS_AS(load_checkpoint(dir.path()), Error);
    }
}

TEST_CASE("stale weight files are removed on save")
{
    test::TempDir dir("stale");
    auto m = test::tiny_model();
    m.config.backbone.depth = 2;
    m.reset_backbone(m.config.backbone);
    save_checkpoint(m, dir.path());
    CHECK(std::filesystem::exists(dir / "backbone.blocks.1.qkv.w.f32"));
    m.config.backbone.depth = 1;
    m.reset_backbone(m.config.backbone);
    save_checkpoint(m, dir.path());
    CHECK_FALSE(std::filesystem::exists(dir / "backbone.blocks.1.qkv.w.f32"));
    CHECK(load_checkpoint(dir.path()).config.backbone.depth == 1);
}
