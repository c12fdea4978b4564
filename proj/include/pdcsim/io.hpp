// Copyright 2026 The pdcsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// File formats shared by the library and the command-line tool: a small
// binary matrix container, CSV tables with a metadata header and hashing.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pdcsim/gaussian.hpp"

namespace pdcsim {

/// 64-bit FNV-1a. Used for content keys and file checksums.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Writes to a temporary sibling and renames it over the target, so readers
/// never observe a half-written file.
void write_file_atomic(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

/// Little-endian container:
///   "PDCSIMBC" | u32 version | str kind | str metadata_json | f64 z | u32 count
///   count x (str name | u64 rows | u64 cols | rows*cols x (f64 re, f64 im))
///   u64 fnv1a of everything above
/// Strings are u32 length + bytes. Matrices are stored row-major.
struct BinaryContainer {
    std::string kind;
    std::string metadata_json;
    double z = 0.0;
    std::vector<std::pair<std::string, Eigen::MatrixXcd>> matrices;

    const Eigen::MatrixXcd& matrix(std::string_view name) const;
};

inline constexpr std::uint32_t kContainerVersion = 1;

std::string encode_container(const BinaryContainer& container);
BinaryContainer decode_container(std::string_view bytes);
void save_container(const std::string& path, const BinaryContainer& container);
BinaryContainer load_container(const std::string& path);

void save_state(const std::string& path, const CorrelationState& state);
CorrelationState load_state(const std::string& path);
/// Human-readable dump; intended for small grids.
std::string state_to_json(const CorrelationState& state);
CorrelationState state_from_json(std::string_view text);

/// Formats with 17 significant digits so values round-trip exactly.
std::string format_double(double value);

struct CsvTable {
    std::vector<std::pair<std::string, std::string>> metadata;  // "# key: value" lines
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::string render() const;
};

}  // namespace pdcsim
