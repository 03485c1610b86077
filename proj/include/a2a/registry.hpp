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

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace a2a {

using ModalityId = int;

struct ModalitySpec {
    std::string name;
    int channels = 1;
    int native_size = 32;
    /// Reciprocal latent standard deviation; unset until estimated.
    std::optional<double> scale_factor;
};

/// Shape every codec must encode into.
struct LatentShape {
    int c = 4;
    int h = 8;
    int w = 8;

    int numel() const { return c * h * w; }
    bool operator==(const LatentShape&) const = default;
};

enum class DirectionStatus { kTrained, kZeroShot };

const char* to_string(DirectionStatus s);

struct TranslationDirection {
    std::string src;
    std::string tgt;
    ModalityId src_id = 0;
    ModalityId tgt_id = 0;
    DirectionStatus status = DirectionStatus::kZeroShot;

    /// "SRC:TGT"
    std::string label() const { return src + ":" + tgt; }
};

/// Ordered (src, tgt) name pairs that have received paired supervision.
using DirectionSet = std::set<std::pair<std::string, std::string>>;

enum class DirectionFilter { kAll, kTrained, kZeroShot };

/// Set of modalities sharing one latent contract. Ids follow registration
/// order and index embedding rows, adapters, and codecs.
class ModalityRegistry {
public:
    explicit ModalityRegistry(LatentShape contract = {});

    ModalityId register_modality(ModalitySpec spec);

    /// Rejects further registrations. Reads are safe to share afterwards.
    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

    const LatentShape& contract() const { return contract_; }
    int size() const { return static_cast<int>(specs_.size()); }
    bool contains(const std::string& name) const;
    ModalityId id_of(const std::string& name) const;
    const ModalitySpec& spec(ModalityId id) const;
    const ModalitySpec& spec(const std::string& name) const { return spec(id_of(name)); }
    const std::vector<ModalitySpec>& specs() const { return specs_; }

    /// Number of stride-2 stages from native size down to the latent size.
    int downsampling_depth(ModalityId id) const;

    void set_scale_factor(ModalityId id, double s);

    TranslationDirection resolve_direction(const std::string& src, const std::string& tgt,
                                           const DirectionSet& trained) const;

    /// Directions in (src_id, tgt_id) lexicographic order.
    std::vector<TranslationDirection> list_directions(const DirectionSet& trained,
                                                      DirectionFilter filter) const;

private:
    LatentShape contract_;
    std::vector<ModalitySpec> specs_;
    bool frozen_ = false;
};

/// Desk-scale registry: SAR, RGB, MS, NIR, PAN with a (4, 8, 8) contract.
/// PAN is twice and MS half the RGB resolution.
ModalityRegistry default_registry(LatentShape contract = {}, int base_size = 32);

/// The seven cross-modal pairings used for training.
std::vector<std::pair<std::string, std::string>> seven_pair_protocol();

/// Both orientations of every pair in the protocol (14 directions).
DirectionSet protocol_directions(const std::vector<std::pair<std::string, std::string>>& pairs);

/// Reference per-modality scale factors, keyed by modality name.
std::vector<std::pair<std::string, double>> reference_scale_factors();

/// Parses "SRC:TGT".
std::pair<std::string, std::string> parse_direction(const std::string& text);

}  // namespace a2a
