// Copyright 2026 The K-SENSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KSENSE_SNAPSHOT_HPP_
#define KSENSE_SNAPSHOT_HPP_

// KSEP v1 parameter snapshots, same container family as KSEB:
//
//   0   4  magic "KSEP"
//   4   1  version (1)
//   5   4  reserved, zero
//   9   4  header length L, then L bytes of "key=value\n" model dimensions
//      4  parameter count
//   per parameter: uint32 name length + name, uint32 rank, rank x uint32
//   dims, float32 values. Little-endian throughout.
//
// Values are stored as float32; optimizer state is not stored.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ksense/model.hpp"

namespace ksense {

std::vector<std::uint8_t> encode_snapshot(const KSenseParams& params);
KSenseParams decode_snapshot(std::span<const std::uint8_t> bytes);

void write_snapshot(const KSenseParams& params, const std::filesystem::path& path);
KSenseParams load_snapshot(const std::filesystem::path& path);

}  // namespace ksense

#endif  // KSENSE_SNAPSHOT_HPP_
