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

#include "a2a/io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "a2a/error.hpp"

namespace a2a::io {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_bytes_atomic(const std::filesystem::path& path, const std::vector<unsigned char>& bytes)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::size_t image_count(const std::array<std::uint32_t, 3>& f)
{
    return static_cast<std::size_t>(f[0]) * f[1] * f[2];
}

}  // namespace

void write_array_file(const std::filesystem::path& path, const std::array<char, 4>& magic,
                      const std::array<std::uint32_t, 3>& fields, std::span<const float> values)
{
    std::vector<unsigned char> bytes;
    bytes.reserve(kHeaderBytes + 4 * values.size());
    for (char c : magic) bytes.push_back(static_cast<unsigned char>(c));
    for (auto f : fields) put_u32(bytes, f);
    for (float v : values) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
    write_bytes_atomic(path, bytes);
}

ArrayFile read_array_file(const std::filesystem::path& path, const std::array<char, 4>& magic,
                          std::size_t (*expected_count)(const std::array<std::uint32_t, 3>&))
{
    const auto bytes = read_bytes(path);
    if (bytes.size() < kHeaderBytes) fail(path.string() + ": truncated header");
    ArrayFile f;
    for (int i = 0; i < 4; ++i) f.magic[static_cast<std::size_t>(i)] = static_cast<char>(bytes[static_cast<std::size_t>(i)]);
    if (f.magic != magic) {
        fail(path.string() + ": bad magic (expected " + std::string(magic.begin(), magic.end()) + ")");
    }
    for (int i = 0; i < 3; ++i) f.fields[static_cast<std::size_t>(i)] = get_u32(bytes.data() + 4 + 4 * i);
    const std::size_t n = expected_count(f.fields);
    if (bytes.size() != kHeaderBytes + 4 * n) {
        fail(path.string() + ": size " + std::to_string(bytes.size()) + " bytes does not match header (" +
             std::to_string(kHeaderBytes + 4 * n) + " expected)");
    }
    f.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.values[i] = std::bit_cast<float>(get_u32(bytes.data() + kHeaderBytes + 4 * i));
    }
    return f;
}

void write_image(const std::filesystem::path& path, const Tensor<float>& chw)
{
    require(chw.rank() == 3, "write_image: expected (C, H, W), got " + shape_str(chw.shape));
    write_array_file(path, kImageMagic,
                     {static_cast<std::uint32_t>(chw.dim(0)), static_cast<std::uint32_t>(chw.dim(1)),
                      static_cast<std::uint32_t>(chw.dim(2))},
                     chw.data);
}

Tensor<float> read_image(const std::filesystem::path& path)
{
    auto f = read_array_file(path, kImageMagic, &image_count);
    return Tensor<float>({static_cast<int>(f.fields[0]), static_cast<int>(f.fields[1]),
                          static_cast<int>(f.fields[2])},
                         std::move(f.values));
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) fail("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    write_bytes_atomic(path, std::vector<unsigned char>(text.begin(), text.end()));
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed)
{
    std::uint64_t h = seed;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace a2a::io
