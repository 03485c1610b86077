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

// UTF-8 key=value text blocks (checkpoint manifests, dataset manifests and
// configuration files). Serialization sorts keys.

#include <map>
#include <optional>
#include <string>

namespace a2a {

class KeyValues {
public:
    /// Parses "key=value" lines; blank lines and lines starting with '#' are
    /// skipped. Throws on a line without '=' or a duplicate key.
    static KeyValues parse(const std::string& text, const std::string& origin = "<text>");

    void set(const std::string& key, const std::string& value);
    bool contains(const std::string& key) const { return entries_.contains(key); }
    std::optional<std::string> find(const std::string& key) const;

    /// Throws naming the missing key.
    const std::string& at(const std::string& key) const;
    long long at_int(const std::string& key) const;
    double at_double(const std::string& key) const;

    std::string serialize() const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

}  // namespace a2a
