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

// Deterministic synthetic multi-modal scenes. Every modality is rendered
// from one shared scene, so all renderings of a seed are spatially aligned.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "a2a/registry.hpp"
#include "a2a/tensor.hpp"

namespace a2a {

inline constexpr int kSceneFeatures = 5;

/// Feature stack (k, H, W) in [-1, 1]:
///   0 land-cover structure (multi-octave value noise composited with shapes)
///   1 vegetation-like saturating response of the structure
///   2 structure blended with independent moisture noise
///   3 sharp thresholded built-up response
///   4 independent fine detail
struct SceneField {
    std::uint64_t seed = 0;
    Tensor<float> field;

    int height() const { return field.dim(1); }
    int width() const { return field.dim(2); }
};

SceneField generate_scene(std::uint64_t seed, int height, int width);

/// (C, native, native) rendering of one built-in modality (SAR, RGB, MS, NIR,
/// PAN) in [-1, 1]. SAR carries 4-look gamma speckle seeded from the scene.
Tensor<float> render_modality(const SceneField& scene, const ModalitySpec& spec);

using PairProtocol = std::vector<std::pair<std::string, std::string>>;

/// "seven-pair" (reference pairings) or "all-pairs" (every unordered pair).
PairProtocol protocol_by_name(const std::string& name, const ModalityRegistry& reg);

struct DatasetManifest {
    std::uint64_t seed_begin = 0;
    std::uint64_t seed_end = 0;  // inclusive
    std::string protocol;
    int scene_size = 0;
    std::size_t rows = 0;
    std::size_t files = 0;
};

/// Writes <out>/<modality>/<scene>.img for every modality used by the
/// protocol, plus pairs.tsv (src path, tgt path, "A-B" tag) and dataset.txt.
DatasetManifest make_paired_dataset(std::uint64_t seed_begin, std::uint64_t seed_end,
                                    const std::string& protocol_name, const ModalityRegistry& reg,
                                    const std::filesystem::path& out_dir, int scene_size = 0);

struct ImagePair {
    std::string src;  // image keys (paths relative to the dataset root)
    std::string tgt;
};

/// Validated, fully loaded paired dataset.
class PairedDataset {
public:
    struct Row {
        std::string a;
        std::string b;
        std::string mod_a;
        std::string mod_b;
    };

    static PairedDataset ingest(const std::filesystem::path& root, const ModalityRegistry& reg);

    const std::filesystem::path& root() const { return root_; }
    const std::vector<Row>& rows() const { return rows_; }
    const Tensor<float>& image(const std::string& key) const;
    const std::string& modality_of(const std::string& key) const;

    /// Pairs oriented src -> tgt, in pairs.tsv order.
    std::vector<ImagePair> direction_pairs(const std::string& src, const std::string& tgt) const;

    /// Directions with at least one pair.
    DirectionSet available_directions() const;

    /// Keys of every image of one modality, sorted.
    std::vector<std::string> modality_images(const std::string& modality) const;

    /// Stacks (C, H, W) images into (B, C, H, W).
    Tensor<float> stack(const std::vector<std::string>& keys) const;

    const std::map<std::string, std::string>& manifest() const { return manifest_; }

private:
    std::filesystem::path root_;
    std::vector<Row> rows_;
    std::map<std::string, Tensor<float>> images_;
    std::map<std::string, std::string> modality_;
    std::map<std::string, std::string> manifest_;
};

/// Deterministic permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Sobel edge map (top `fraction` of gradient magnitude) of the channel mean.
std::vector<bool> edge_map(const Tensor<float>& chw, double fraction = 0.2);

/// Box-filter (or replicate) resample of a (C, H, W) image to size x size.
Tensor<float> resample(const Tensor<float>& chw, int size);

}  // namespace a2a
