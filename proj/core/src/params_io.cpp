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

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

#include "ksense/error.hpp"
#include "ksense/snapshot.hpp"

namespace ksense {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_text(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

struct Cursor {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (data.size() - pos < n) {
      throw FormatError(FormatErrorKind::kTruncated, pos,
                        "expected " + std::to_string(n) + " more bytes, " +
                            std::to_string(data.size() - pos) + " remain");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data[pos + i]} << (8 * i);
    pos += 4;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data.data() + pos), n);
    pos += n;
    return s;
  }
};

std::string dims_text(const ModelDims& d) {
  std::ostringstream os;
  os << "d_h=" << d.d_h << "\n"
     << "d_k=" << d.d_k << "\n"
     << "n_relations=" << d.n_relations << "\n"
     << "gru_hidden=" << d.gru_hidden << "\n"
     << "mlp_hidden=" << d.mlp_hidden << "\n"
     << "n_classes=" << d.n_classes << "\n";
  return os.str();
}

ModelDims dims_from_text(const std::string& text, std::size_t at) {
  std::map<std::string, std::size_t> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    std::size_t v = 0;
    if (eq == std::string::npos ||
        std::from_chars(line.data() + eq + 1, line.data() + line.size(), v).ec !=
            std::errc()) {
      throw FormatError(FormatErrorKind::kInvalidRecord, at,
                        "malformed header line '" + line + "'");
    }
    kv[line.substr(0, eq)] = v;
  }
  ModelDims d;
  auto take = [&](const char* key, std::size_t& field) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw FormatError(FormatErrorKind::kInvalidRecord, at,
                        std::string("missing header key '") + key + "'");
    }
    field = it->second;
  };
  take("d_h", d.d_h);
  take("d_k", d.d_k);
  take("n_relations", d.n_relations);
  take("gru_hidden", d.gru_hidden);
  take("mlp_hidden", d.mlp_hidden);
  take("n_classes", d.n_classes);
  return d;
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const KSenseParams& params) {
  std::vector<std::uint8_t> out = {'K', 'S', 'E', 'P', 1};
  put_u32(out, 0);
  put_text(out, dims_text(params.dims()));
  put_u32(out, static_cast<std::uint32_t>(params.parameters().size()));
  for (const auto& p : params.parameters()) {
    put_text(out, p.name);
    put_u32(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p.tensor.values()) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

KSenseParams decode_snapshot(std::span<const std::uint8_t> bytes) {
  Cursor c{bytes};
  c.need(4);
  if (std::memcmp(bytes.data(), "KSEP", 4) != 0) {
    throw FormatError(FormatErrorKind::kBadMagic, 0, "expected \"KSEP\"");
  }
  c.pos = 4;
  c.need(1);
  if (bytes[4] != 1) {
    throw FormatError(FormatErrorKind::kUnsupportedVersion, 4,
                      "version " + std::to_string(bytes[4]));
  }
  c.pos = 5;
  if (c.u32() != 0) {
    throw FormatError(FormatErrorKind::kInvalidRecord, 5, "reserved bytes must be zero");
  }
  const std::uint32_t header_len = c.u32();
  const std::size_t header_at = c.pos;
  const ModelDims dims = dims_from_text(c.text(header_len), header_at);
  KSenseParams params = KSenseParams::zeros(dims);
  const std::size_t count_at = c.pos;
  const std::uint32_t count = c.u32();
  if (count != params.parameters().size()) {
    throw FormatError(FormatErrorKind::kCountMismatch, count_at,
                      "snapshot holds " + std::to_string(count) +
                          " tensors, model has " +
                          std::to_string(params.parameters().size()));
  }
  for (auto& p : params.parameters()) {
    const std::size_t at = c.pos;
    const std::string name = c.text(c.u32());
    if (name != p.name) {
      throw FormatError(FormatErrorKind::kInvalidRecord, at,
                        "expected tensor '" + p.name + "', found '" + name + "'");
    }
    const std::uint32_t rank = c.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(c.u32());
    if (shape != p.tensor.shape()) {
      throw FormatError(FormatErrorKind::kInvalidRecord, at,
                        "tensor '" + name + "' has shape " +
                            shape_to_string(shape) + ", expected " +
                            shape_to_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_values();
    for (double& v : dst) {
      const std::size_t vat = c.pos;
      const float f = std::bit_cast<float>(c.u32());
      if (!std::isfinite(f)) {
        throw FormatError(FormatErrorKind::kNonFinite, vat, "tensor '" + name + "'");
      }
      v = f;
    }
  }
  if (c.pos != bytes.size()) {
    throw FormatError(FormatErrorKind::kCountMismatch, c.pos,
                      "unexpected bytes after the last tensor");
  }
  return params;
}

void write_snapshot(const KSenseParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_snapshot(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

KSenseParams load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace ksense
