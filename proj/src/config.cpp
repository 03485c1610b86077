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

#include <charconv>
#include <sstream>

#include "a2a/error.hpp"
#include "a2a/kv.hpp"

namespace a2a {

KeyValues KeyValues::parse(const std::string& text, const std::string& origin)
{
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        const auto where = origin + ":" + std::to_string(line_no);
        if (eq == std::string::npos || eq == 0) fail(where + ": expected key=value");
        auto key = line.substr(0, eq);
        if (kv.entries_.contains(key)) fail(where + ": duplicate key " + key);
        kv.entries_.emplace(std::move(key), line.substr(eq + 1));
    }
    return kv;
}

void KeyValues::set(const std::string& key, const std::string& value)
{
    require(!key.empty() && key.find_first_of("=\n") == std::string::npos, "invalid key: " + key);
    require(value.find('\n') == std::string::npos, "value of " + key + " contains a newline");
    entries_[key] = value;
}

std::optional<std::string> KeyValues::find(const std::string& key) const
{
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

const std::string& KeyValues::at(const std::string& key) const
{
    auto it = entries_.find(key);
    if (it == entries_.end()) fail("missing key " + key);
    return it->second;
}

long long KeyValues::at_int(const std::string& key) const { return parse_int(at(key), key); }
double KeyValues::at_double(const std::string& key) const { return parse_double(at(key), key); }

std::string KeyValues::serialize() const
{
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& what)
{
    double v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        fail(what + ": not a number: '" + text + "'");
    }
    return v;
}

long long parse_int(const std::string& text, const std::string& what)
{
    long long v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        fail(what + ": not an integer: '" + text + "'");
    }
    return v;
}

}  // namespace a2a
