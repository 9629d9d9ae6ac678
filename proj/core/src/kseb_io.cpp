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
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "ksense/error.hpp"
#include "ksense/fixtures.hpp"

namespace ksense {

namespace {

constexpr char kMagic[4] = {'K', 'S', 'E', 'B'};
constexpr std::size_t kHeaderSize = 9;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void text(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(FormatErrorKind::kTruncated, pos_,
                        std::string(what) + ": expected " + std::to_string(n) +
                            " bytes, only " + std::to_string(remaining()) +
                            " remain (file length " +
                            std::to_string(data_.size()) + ")");
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return data_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  // Reads `count` float32 values, rejecting NaN/Inf at their exact offset.
  void floats(std::size_t count, std::vector<double>& out, const char* what) {
    need(count * 4, what);
    out.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t at = pos_;
      const float v = std::bit_cast<float>(u32(what));
      if (!std::isfinite(v)) {
        throw FormatError(FormatErrorKind::kNonFinite, at,
                          std::string(what) + " value " + std::to_string(i));
      }
      out[i] = static_cast<double>(v);
    }
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::size_t parse_size(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("manifest: '" + std::string(key) +
                      "' is not a non-negative integer: '" +
                      std::string(value) + "'");
  }
  return out;
}

std::vector<double> parse_doubles(std::string_view key, std::string_view value) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t comma = value.find(',', start);
    if (comma == std::string_view::npos) comma = value.size();
    std::string_view item = value.substr(start, comma - start);
    double v = 0.0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() ||
        res.ptr != item.data() + item.size()) {
      throw ConfigError("manifest: '" + std::string(key) +
                        "' has malformed number '" + std::string(item) + "'");
    }
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

bool is_core_key(std::string_view key) {
  static const std::set<std::string_view> kKeys = {
      "name", "d_h", "d_k", "n_relations", "n_classes", "post_count",
      "class_prior"};
  return kKeys.contains(key);
}

}  // namespace

std::string manifest_to_text(const DatasetManifest& m) {
  std::ostringstream os;
  os << "name=" << m.name << "\n"
     << "d_h=" << m.d_h << "\n"
     << "d_k=" << m.d_k << "\n"
     << "n_relations=" << m.n_relations << "\n"
     << "n_classes=" << m.n_classes << "\n"
     << "post_count=" << m.post_count << "\n"
     << "class_prior=";
  for (std::size_t i = 0; i < m.class_prior.size(); ++i) {
    if (i) os << ",";
    os << format_double(m.class_prior[i]);
  }
  os << "\n";
  for (const auto& [k, v] : m.extra) {
    if (is_core_key(k) || k.find_first_of("=\n") != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw ConfigError("manifest: invalid extra entry '" + k + "'");
    }
    os << k << "=" << v << "\n";
  }
  return os.str();
}

DatasetManifest manifest_from_text(std::string_view text) {
  DatasetManifest m;
  std::set<std::string, std::less<>> seen;
  bool have_prior = false;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ConfigError("manifest: malformed line '" + std::string(line) + "'");
    }
    std::string_view key = line.substr(0, eq);
    std::string_view value = line.substr(eq + 1);
    if (!seen.emplace(key).second) {
      throw ConfigError("manifest: duplicate key '" + std::string(key) + "'");
    }
    if (key == "name") {
      m.name = value;
    } else if (key == "d_h") {
      m.d_h = parse_size(key, value);
    } else if (key == "d_k") {
      m.d_k = parse_size(key, value);
    } else if (key == "n_relations") {
      m.n_relations = parse_size(key, value);
    } else if (key == "n_classes") {
      m.n_classes = parse_size(key, value);
    } else if (key == "post_count") {
      m.post_count = parse_size(key, value);
    } else if (key == "class_prior") {
      m.class_prior = parse_doubles(key, value);
      have_prior = true;
    } else {
      m.extra.emplace(std::string(key), std::string(value));
    }
  }
  for (const char* required : {"d_h", "d_k", "n_relations", "n_classes", "post_count"}) {
    if (!seen.contains(std::string_view(required))) {
      throw ConfigError(std::string("manifest: missing key '") + required + "'");
    }
  }
  if (!have_prior) {
    m.class_prior.assign(m.n_classes, 1.0 / static_cast<double>(m.n_classes));
  }
  m.validate();
  return m;
}

std::vector<std::uint8_t> encode_kseb(const Dataset& dataset) {
  dataset.validate();
  const auto& m = dataset.manifest;
  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u8(kKsebVersion);
  w.u32(0);
  w.text(manifest_to_text(m));
  auto put_floats = [&](const std::vector<double>& values, const std::string& id) {
    for (double v : values) {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) {
        throw ConfigError("post '" + id + "': value overflows float32");
      }
      w.f32(f);
    }
  };
  for (const auto& f : dataset.fixtures) {
    w.text(f.post_id);
    w.u8(static_cast<std::uint8_t>(f.label));
    w.u32(f.n_sentences);
    put_floats(f.post_embedding, f.post_id);
    put_floats(f.knowledge, f.post_id);
  }
  return w.take();
}

Dataset decode_kseb(std::span<const std::uint8_t> bytes,
                    const LoadOptions& options) {
  ByteReader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(FormatErrorKind::kBadMagic, 0, "expected \"KSEB\"");
  }
  r.text(4, "magic");
  const std::uint8_t version = r.u8("version");
  if (version != kKsebVersion) {
    throw FormatError(FormatErrorKind::kUnsupportedVersion, 4,
                      "version " + std::to_string(version));
  }
  if (r.u32("reserved") != 0) {
    throw FormatError(FormatErrorKind::kInvalidRecord, 5,
                      "reserved bytes must be zero");
  }
  const std::uint32_t manifest_len = r.u32("manifest length");
  const std::size_t manifest_at = r.offset();
  Dataset ds;
  try {
    ds.manifest = manifest_from_text(r.text(manifest_len, "manifest"));
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrorKind::kInvalidRecord, manifest_at, e.what());
  }
  const auto& m = ds.manifest;
  std::set<std::string, std::less<>> ids;
  ds.fixtures.reserve(m.post_count);
  for (std::size_t i = 0; i < m.post_count; ++i) {
    const std::size_t record_at = r.offset();
    if (r.remaining() == 0) {
      throw FormatError(FormatErrorKind::kCountMismatch, record_at,
                        "manifest declares " + std::to_string(m.post_count) +
                            " posts, payload holds " + std::to_string(i));
    }
    EmbeddingFixture f;
    const std::uint32_t id_len = r.u32("post id length");
    f.post_id = r.text(id_len, "post id");
    if (!ids.insert(f.post_id).second) {
      throw FormatError(FormatErrorKind::kInvalidRecord, record_at,
                        "duplicate post id '" + f.post_id + "'");
    }
    const std::size_t label_at = r.offset();
    f.label = r.u8("label");
    if (f.label >= m.n_classes) {
      throw FormatError(FormatErrorKind::kInvalidRecord, label_at,
                        "label " + std::to_string(f.label) + " >= n_classes");
    }
    const std::size_t count_at = r.offset();
    f.n_sentences = r.u32("n_sentences");
    if (f.n_sentences == 0 || f.n_sentences > options.max_sentences) {
      throw FormatError(FormatErrorKind::kInvalidRecord, count_at,
                        "post '" + f.post_id + "' has " +
                            std::to_string(f.n_sentences) +
                            " sentences (allowed 1.." +
                            std::to_string(options.max_sentences) + ")");
    }
    r.floats(m.d_h, f.post_embedding, "post embedding");
    r.floats(std::size_t{f.n_sentences} * m.n_relations * m.d_k, f.knowledge,
             "knowledge");
    ds.fixtures.push_back(std::move(f));
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorKind::kCountMismatch, r.offset(),
                      std::to_string(r.remaining()) +
                          " bytes follow the last of " +
                          std::to_string(m.post_count) + " declared posts");
  }
  return ds;
}

std::uint64_t write_fixture_file(const Dataset& dataset,
                                 const std::filesystem::path& path) {
  const auto bytes = encode_kseb(dataset);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
  }
  auto sidecar = path;
  sidecar += ".manifest";
  std::ofstream side(sidecar, std::ios::trunc);
  side << manifest_to_text(dataset.manifest);
  if (!side) throw IoError("cannot write '" + sidecar.string() + "'");
  return bytes.size();
}

Dataset load_fixture_file(const std::filesystem::path& path,
                          const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_kseb(bytes, options);
}

Dataset quantize_to_float32(Dataset dataset) {
  for (auto& f : dataset.fixtures) {
    for (double& v : f.post_embedding) v = static_cast<float>(v);
    for (double& v : f.knowledge) v = static_cast<float>(v);
  }
  return dataset;
}

}  // namespace ksense
