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

#include "a2a/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "a2a/io.hpp"
#include "a2a/kv.hpp"
#include "a2a/rng.hpp"

namespace a2a {

namespace {

constexpr double kPi = 3.14159265358979323846;

double smoothstep(double x) { return x * x * (3.0 - 2.0 * x); }

/// Multi-octave value noise; octave o uses cells of size height / 2^(o+first).
std::vector<double> value_noise(Rng& rng, int h, int w, int first_octave, int octaves, double amplitude)
{
    std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
    double amp = 1.0;
    double norm = 0.0;
    for (int o = 0; o < octaves; ++o) {
        const int cells = 1 << (o + first_octave);
        const double cell = static_cast<double>(h) / cells;
        const int gx = cells + 2;
        std::vector<double> lattice(static_cast<std::size_t>(gx) * gx);
        for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
        for (int y = 0; y < h; ++y) {
            const double fy = (y + 0.5) / cell;
            const int iy = static_cast<int>(fy);
            const double ty = smoothstep(fy - iy);
            for (int x = 0; x < w; ++x) {
                const double fx = (x + 0.5) / cell;
                const int ix = static_cast<int>(fx);
                const double tx = smoothstep(fx - ix);
                const auto at = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * gx + xx]; };
                const double top = at(iy, ix) * (1 - tx) + at(iy, ix + 1) * tx;
                const double bot = at(iy + 1, ix) * (1 - tx) + at(iy + 1, ix + 1) * tx;
                out[static_cast<std::size_t>(y) * w + x] += amp * (top * (1 - ty) + bot * ty);
            }
        }
        norm += amp;
        amp *= 0.5;
    }
    for (auto& v : out) v = amplitude * v / norm;
    return out;
}

double clip1(double v) { return std::clamp(v, -1.0, 1.0); }

/// Signed distance to a convex polygon (negative inside).
double polygon_sd(const std::vector<std::pair<double, double>>& pts, double x, double y)
{
    double worst = -1e30;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto [x0, y0] = pts[i];
        const auto [x1, y1] = pts[(i + 1) % n];
        const double ex = x1 - x0;
        const double ey = y1 - y0;
        const double len = std::hypot(ex, ey);
        // Outward normal for counter-clockwise vertex order.
        const double nx = ey / len;
        const double ny = -ex / len;
        worst = std::max(worst, (x - x0) * nx + (y - y0) * ny);
    }
    return worst;
}

double segment_distance(double ax, double ay, double bx, double by, double x, double y)
{
    const double vx = bx - ax;
    const double vy = by - ay;
    const double t = std::clamp(((x - ax) * vx + (y - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
    return std::hypot(x - (ax + t * vx), y - (ay + t * vy));
}

std::uint64_t tag_hash(const std::string& s)
{
    return io::fnv1a(std::span(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

std::string scene_name(std::uint64_t seed)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(seed));
    return buf;
}

}  // namespace

SceneField generate_scene(std::uint64_t seed, int height, int width)
{
    require(height >= 16 && width >= 16, "generate_scene: scene must be at least 16x16");
    require(height == width, "generate_scene: scenes are square");
    Rng rng(seed, 0x5ce7e);
    const int h = height;
    const int w = width;
    const std::size_t n = static_cast<std::size_t>(h) * w;

    auto cover = value_noise(rng, h, w, 1, 3, 1.0);
    auto detail = value_noise(rng, h, w, 2, 2, 0.35);
    auto moisture = value_noise(rng, h, w, 1, 2, 0.5);

    const int shapes = rng.uniform_int(2, 6);
    const double soft = std::max(1.0, h / 48.0);
    for (int s = 0; s < shapes; ++s) {
        const double value = rng.uniform(-0.9, 0.9);
        const bool line = rng.uniform() < 0.35;
        std::vector<double> alpha(n, 0.0);
        if (line) {
            const double ax = rng.uniform(0, w);
            const double ay = rng.uniform(0, h);
            const double ang = rng.uniform(0, kPi);
            const double len = rng.uniform(0.5, 1.2) * w;
            const double bx = ax + std::cos(ang) * len;
            const double by = ay + std::sin(ang) * len;
            const double half = rng.uniform(0.025, 0.045) * w;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double sd = segment_distance(ax, ay, bx, by, x + 0.5, y + 0.5) - half;
                    alpha[static_cast<std::size_t>(y) * w + x] = std::clamp(0.5 - sd / soft, 0.0, 1.0);
                }
            }
        } else {
            const double cx = rng.uniform(0.15, 0.85) * w;
            const double cy = rng.uniform(0.15, 0.85) * h;
            const double r = rng.uniform(0.12, 0.3) * w;
            const int verts = rng.uniform_int(3, 6);
            const double phase = rng.uniform(0, 2 * kPi);
            std::vector<std::pair<double, double>> pts;
            for (int v = 0; v < verts; ++v) {
                const double a = phase + 2 * kPi * (v + rng.uniform(-0.2, 0.2)) / verts;
                const double rr = r * rng.uniform(0.75, 1.0);
                pts.emplace_back(cx + rr * std::cos(a), cy + rr * std::sin(a));
            }
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double sd = polygon_sd(pts, x + 0.5, y + 0.5);
                    alpha[static_cast<std::size_t>(y) * w + x] = std::clamp(0.5 - sd / soft, 0.0, 1.0);
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) cover[i] = cover[i] * (1.0 - alpha[i]) + value * alpha[i];
    }

    SceneField scene;
    scene.seed = seed;
    scene.field = Tensor<float>({kSceneFeatures, h, w});
    float* f = scene.field.ptr();
    for (std::size_t i = 0; i < n; ++i) {
        const double c = clip1(cover[i]);
        f[i] = static_cast<float>(c);
        f[n + i] = static_cast<float>(std::tanh(1.5 * c + 0.3 * detail[i]));
        f[2 * n + i] = static_cast<float>(clip1(0.7 * c + moisture[i] * 0.6));
        f[3 * n + i] = static_cast<float>(std::tanh(2.0 * (c - 0.2)));
        f[4 * n + i] = static_cast<float>(clip1(detail[i]));
    }
    return scene;
}

Tensor<float> resample(const Tensor<float>& chw, int size)
{
    require(chw.rank() == 3 && chw.dim(1) == chw.dim(2), "resample: expects square (C, H, W)");
    const int c = chw.dim(0);
    const int h = chw.dim(1);
    Tensor<float> out({c, size, size});
    if (size <= h) {
        require(h % size == 0, "resample: size must divide the input size");
        const int k = h / size;
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    double s = 0;
                    for (int dy = 0; dy < k; ++dy) {
                        for (int dx = 0; dx < k; ++dx) {
                            s += chw.data[(static_cast<std::size_t>(ch) * h + y * k + dy) * h + x * k + dx];
                        }
                    }
                    out.data[(static_cast<std::size_t>(ch) * size + y) * size + x] = static_cast<float>(s / (k * k));
                }
            }
        }
    } else {
        require(size % h == 0, "resample: input size must divide the output size");
        const int k = size / h;
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    out.data[(static_cast<std::size_t>(ch) * size + y) * size + x] =
                        chw.data[(static_cast<std::size_t>(ch) * h + y / k) * h + x / k];
                }
            }
        }
    }
    return out;
}

Tensor<float> render_modality(const SceneField& scene, const ModalitySpec& spec)
{
    const int h = scene.height();
    const std::size_t n = static_cast<std::size_t>(h) * scene.width();
    const float* f = scene.field.ptr();
    auto feat = [&](int k, std::size_t i) { return static_cast<double>(f[static_cast<std::size_t>(k) * n + i]); };

    // Channel mixes at scene resolution, resampled to the native size.
    auto mix = [&](int channels, auto&& fn) {
        Tensor<float> full({channels, h, h});
        for (std::size_t i = 0; i < n; ++i) {
            for (int ch = 0; ch < channels; ++ch) {
                full.data[static_cast<std::size_t>(ch) * n + i] = static_cast<float>(clip1(fn(ch, i)));
            }
        }
        return resample(full, spec.native_size);
    };
    auto rgb = [&](int ch, std::size_t i) {
        switch (ch) {
        case 0: return 0.55 * feat(0, i) + 0.25 * feat(3, i) + 0.15 * feat(4, i) - 0.05;
        case 1: return 0.35 * feat(0, i) + 0.5 * feat(1, i) + 0.1 * feat(4, i) + 0.05;
        default: return 0.45 * feat(2, i) - 0.25 * feat(1, i) + 0.2 * feat(0, i) - 0.1;
        }
    };

    Tensor<float> img;
    if (spec.name == "RGB") {
        img = mix(3, rgb);
    } else if (spec.name == "NIR") {
        img = mix(1, [&](int, std::size_t i) {
            return std::tanh(1.4 * (0.7 * feat(1, i) + 0.5 * feat(4, i)) + 0.25);
        });
    } else if (spec.name == "MS") {
        img = mix(6, [&](int ch, std::size_t i) {
            switch (ch) {
            case 0: return 0.6 * feat(0, i) + 0.2 * feat(2, i) + 0.1;
            case 1: return 0.5 * feat(1, i) + 0.3 * feat(0, i);
            case 2: return 0.4 * feat(2, i) + 0.4 * feat(3, i) - 0.1;
            case 3: return 0.7 * feat(1, i) + 0.3 * feat(4, i) + 0.2;
            case 4: return 0.5 * feat(3, i) - 0.3 * feat(1, i) - 0.2;
            default: return 0.3 * feat(0, i) + 0.3 * feat(2, i) + 0.2 * feat(4, i) + 0.3;
            }
        });
    } else if (spec.name == "PAN") {
        img = mix(1, [&](int, std::size_t i) {
            const double lum = 0.3 * clip1(rgb(0, i)) + 0.59 * clip1(rgb(1, i)) + 0.11 * clip1(rgb(2, i));
            return 1.25 * lum + 0.1;
        });
    } else if (spec.name == "SAR") {
        // Backscatter in log domain, then 4-look multiplicative speckle at the
        // native resolution and log compression.
        constexpr double kDynamic = 5.0;
        constexpr double kCompress = 0.12;
        auto log_backscatter = mix(1, [&](int, std::size_t i) {
            return (0.6 * feat(0, i) + 0.4 * feat(3, i));
        });
        Rng speckle(scene.seed, tag_hash("SAR"));
        img = log_backscatter;
        for (auto& v : img.data) {
            const double log_intensity = kDynamic * v + std::log(speckle.gamma_unit_mean(4));
            v = static_cast<float>(clip1(kCompress * log_intensity));
        }
    } else {
        fail("render_modality: unknown modality " + spec.name);
    }
    require(img.dim(0) == spec.channels,
            "render_modality: " + spec.name + " is registered with " + std::to_string(spec.channels) +
                " channels but renders " + std::to_string(img.dim(0)));
    return img;
}

PairProtocol protocol_by_name(const std::string& name, const ModalityRegistry& reg)
{
    PairProtocol p;
    if (name == "seven-pair") {
        p = seven_pair_protocol();
    } else if (name == "all-pairs") {
        for (int i = 0; i < reg.size(); ++i) {
            for (int j = i + 1; j < reg.size(); ++j) p.emplace_back(reg.spec(i).name, reg.spec(j).name);
        }
    } else {
        throw UsageError("unknown protocol '" + name + "' (expected seven-pair or all-pairs)");
    }
    for (const auto& [a, b] : p) {
        require(reg.contains(a) && reg.contains(b), "protocol names an unregistered modality: " + a + "-" + b);
    }
    return p;
}

DatasetManifest make_paired_dataset(std::uint64_t seed_begin, std::uint64_t seed_end,
                                    const std::string& protocol_name, const ModalityRegistry& reg,
                                    const std::filesystem::path& out_dir, int scene_size)
{
    require(seed_begin <= seed_end, "make_paired_dataset: empty seed range");
    const auto protocol = protocol_by_name(protocol_name, reg);
    if (scene_size == 0) {
        for (const auto& s : reg.specs()) scene_size = std::max(scene_size, s.native_size);
    }
    std::set<std::string> used;
    for (const auto& [a, b] : protocol) {
        used.insert(a);
        used.insert(b);
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail("cannot create " + out_dir.string() + ": " + ec.message());
    for (const auto& m : used) {
        std::filesystem::create_directories(out_dir / m, ec);
        if (ec) fail("cannot create " + (out_dir / m).string() + ": " + ec.message());
    }

    DatasetManifest man;
    man.seed_begin = seed_begin;
    man.seed_end = seed_end;
    man.protocol = protocol_name;
    man.scene_size = scene_size;
    std::ostringstream tsv;
    for (std::uint64_t seed = seed_begin; seed <= seed_end; ++seed) {
        const auto scene = generate_scene(seed, scene_size, scene_size);
        const std::string name = scene_name(seed) + ".img";
        for (const auto& m : used) {
            io::write_image(out_dir / m / name, render_modality(scene, reg.spec(m)));
            ++man.files;
        }
        for (const auto& [a, b] : protocol) {
            tsv << a << '/' << name << '\t' << b << '/' << name << '\t' << a << '-' << b << '\n';
            ++man.rows;
        }
    }
    io::write_text(out_dir / "pairs.tsv", tsv.str());

    KeyValues kv;
    kv.set("format_version", "1");
    kv.set("protocol", protocol_name);
    kv.set("scene_size", std::to_string(scene_size));
    kv.set("seed_begin", std::to_string(seed_begin));
    kv.set("seed_end", std::to_string(seed_end));
    kv.set("rows", std::to_string(man.rows));
    for (int i = 0; i < reg.size(); ++i) {
        const auto& s = reg.spec(i);
        kv.set("modality." + std::to_string(i) + ".name", s.name);
        kv.set("modality." + std::to_string(i) + ".channels", std::to_string(s.channels));
        kv.set("modality." + std::to_string(i) + ".native_size", std::to_string(s.native_size));
    }
    io::write_text(out_dir / "dataset.txt", kv.serialize());
    return man;
}

PairedDataset PairedDataset::ingest(const std::filesystem::path& root, const ModalityRegistry& reg)
{
    PairedDataset ds;
    ds.root_ = root;
    const auto tsv_path = root / "pairs.tsv";
    if (!std::filesystem::exists(tsv_path)) fail("missing " + tsv_path.string());
    std::istringstream in(io::read_text(tsv_path));
    std::string line;
    int line_no = 0;
    auto load = [&](const std::string& key, const std::string& modality) {
        if (ds.images_.contains(key)) {
            if (ds.modality_[key] != modality) fail(key + " is tagged as both " + ds.modality_[key] + " and " + modality);
            return;
        }
        const auto path = root / key;
        if (!std::filesystem::exists(path)) fail("missing image file " + path.string());
        auto img = io::read_image(path);
        const auto& spec = reg.spec(modality);
        const Shape want{spec.channels, spec.native_size, spec.native_size};
        if (img.shape != want) {
            fail(path.string() + ": shape " + shape_str(img.shape) + " conflicts with registry " + modality +
                 " expected " + shape_str(want));
        }
        ds.images_.emplace(key, std::move(img));
        ds.modality_.emplace(key, modality);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        const auto where = tsv_path.string() + ":" + std::to_string(line_no);
        if (cols.size() != 3) fail(where + ": expected 3 tab-separated columns");
        const auto dash = cols[2].find('-');
        if (dash == std::string::npos) fail(where + ": pair tag must look like A-B");
        Row row{cols[0], cols[1], cols[2].substr(0, dash), cols[2].substr(dash + 1)};
        if (!reg.contains(row.mod_a) || !reg.contains(row.mod_b)) {
            fail(where + ": pair tag names an unregistered modality");
        }
        load(row.a, row.mod_a);
        load(row.b, row.mod_b);
        ds.rows_.push_back(std::move(row));
    }
    if (std::filesystem::exists(root / "dataset.txt")) {
        ds.manifest_ = KeyValues::parse(io::read_text(root / "dataset.txt")).entries();
    }
    return ds;
}

const Tensor<float>& PairedDataset::image(const std::string& key) const
{
    auto it = images_.find(key);
    require(it != images_.end(), "dataset has no image " + key);
    return it->second;
}

const std::string& PairedDataset::modality_of(const std::string& key) const
{
    auto it = modality_.find(key);
    require(it != modality_.end(), "dataset has no image " + key);
    return it->second;
}

std::vector<ImagePair> PairedDataset::direction_pairs(const std::string& src, const std::string& tgt) const
{
    std::vector<ImagePair> out;
    for (const auto& r : rows_) {
        if (r.mod_a == src && r.mod_b == tgt) out.push_back({r.a, r.b});
        else if (r.mod_a == tgt && r.mod_b == src) out.push_back({r.b, r.a});
    }
    return out;
}

DirectionSet PairedDataset::available_directions() const
{
    DirectionSet out;
    for (const auto& r : rows_) {
        out.insert({r.mod_a, r.mod_b});
        out.insert({r.mod_b, r.mod_a});
    }
    return out;
}

std::vector<std::string> PairedDataset::modality_images(const std::string& modality) const
{
    std::vector<std::string> out;
    for (const auto& [key, m] : modality_) {
        if (m == modality) out.push_back(key);
    }
    return out;
}

Tensor<float> PairedDataset::stack(const std::vector<std::string>& keys) const
{
    require(!keys.empty(), "stack: no images");
    const auto& first = image(keys.front());
    Shape shape{static_cast<int>(keys.size())};
    shape.insert(shape.end(), first.shape.begin(), first.shape.end());
    Tensor<float> out(shape);
    const std::size_t item = first.numel();
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto& img = image(keys[i]);
        require(img.shape == first.shape, "stack: mixed image shapes");
        std::copy(img.data.begin(), img.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * item));
    }
    return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed)
{
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed, 0x5407);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

std::vector<bool> edge_map(const Tensor<float>& chw, double fraction)
{
    require(chw.rank() == 3, "edge_map: expects (C, H, W)");
    const int c = chw.dim(0);
    const int h = chw.dim(1);
    const int w = chw.dim(2);
    std::vector<double> gray(static_cast<std::size_t>(h) * w, 0.0);
    for (int ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < gray.size(); ++i) gray[i] += chw.data[static_cast<std::size_t>(ch) * h * w + i] / c;
    }
    auto at = [&](const std::vector<double>& img, int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return img[static_cast<std::size_t>(y) * w + x];
    };
    std::vector<double> blur(gray.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) s += at(gray, y + dy, x + dx);
            }
            blur[static_cast<std::size_t>(y) * w + x] = s / 9.0;
        }
    }
    std::vector<double> mag(gray.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = (at(blur, y - 1, x + 1) + 2 * at(blur, y, x + 1) + at(blur, y + 1, x + 1)) -
                              (at(blur, y - 1, x - 1) + 2 * at(blur, y, x - 1) + at(blur, y + 1, x - 1));
            const double gy = (at(blur, y + 1, x - 1) + 2 * at(blur, y + 1, x) + at(blur, y + 1, x + 1)) -
                              (at(blur, y - 1, x - 1) + 2 * at(blur, y - 1, x) + at(blur, y - 1, x + 1));
            mag[static_cast<std::size_t>(y) * w + x] = std::hypot(gx, gy);
        }
    }
    auto sorted = mag;
    const auto k = static_cast<std::size_t>(std::clamp(fraction, 0.0, 1.0) * static_cast<double>(mag.size()));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mag.size() - std::max<std::size_t>(k, 1)), sorted.end());
    const double thr = sorted[mag.size() - std::max<std::size_t>(k, 1)];
    std::vector<bool> edges(mag.size());
    for (std::size_t i = 0; i < mag.size(); ++i) edges[i] = mag[i] >= thr;
    return edges;
}

}  // namespace a2a
