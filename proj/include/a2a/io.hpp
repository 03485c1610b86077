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

// Little-endian binary array files sharing one 16-byte header layout:
// 4 magic bytes followed by three unsigned 32-bit fields, then row-major
// 32-bit floats. Image files use magic "A2AI" with (channels, height,
// width); checkpoint weights use "A2A0" with (rank, dim0, dim1).

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "a2a/tensor.hpp"

namespace a2a::io {

inline constexpr std::array<char, 4> kImageMagic{'A', '2', 'A', 'I'};
inline constexpr std::array<char, 4> kWeightMagic{'A', '2', 'A', '0'};
inline constexpr std::size_t kHeaderBytes = 16;

struct ArrayFile {
    std::array<char, 4> magic{};
    std::array<std::uint32_t, 3> fields{};
    std::vector<float> values;
};

/// Writes via a temporary file and rename, so readers never see partial files.
void write_array_file(const std::filesystem::path& path, const std::array<char, 4>& magic,
                      const std::array<std::uint32_t, 3>& fields, std::span<const float> values);

/// Reads a whole array file; `expected_count(fields)` gives the float count.
ArrayFile read_array_file(const std::filesystem::path& path, const std::array<char, 4>& magic,
                          std::size_t (*expected_count)(const std::array<std::uint32_t, 3>&));

/// (C, H, W) image tensor to/from a .img file.
void write_image(const std::filesystem::path& path, const Tensor<float>& chw);
Tensor<float> read_image(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// FNV-1a 64-bit digest.
std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace a2a::io
