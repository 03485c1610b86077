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

// Checkpoint directory: manifest.txt (sorted key=value lines) plus one
// "<component>.<key>.f32" weight file per parameter array.

#include <filesystem>
#include <map>
#include <string>

#include "a2a/model.hpp"
#include "a2a/nn.hpp"

namespace a2a {

inline constexpr int kCheckpointVersion = 1;

/// Optional optimizer state saved next to the weights, keyed by group name
/// ("backbone", "adapters", "codec.SAR", ...).
struct OptimizerState {
    std::map<std::string, nn::Adam<float>*> groups;
};

/// Writes the checkpoint and returns the FNV-1a digest of manifest.txt.
std::string save_checkpoint(const Any2AnyModel& model, const std::filesystem::path& dir,
                            const OptimizerState* optim = nullptr);

/// Loads and validates a checkpoint. When `optim` names groups, their state is
/// restored if present on disk.
Any2AnyModel load_checkpoint(const std::filesystem::path& dir, OptimizerState* optim = nullptr);

/// Parsed manifest only.
std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir);

std::string format_directions(const DirectionSet& set);
DirectionSet parse_directions(const std::string& text);

}  // namespace a2a
