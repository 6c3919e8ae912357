// Copyright 2026 The mtsplit Authors.
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

#include "mtsplit/cli/checkpoint.h"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "mtsplit/error.h"

namespace mtsplit::cli {
namespace {

constexpr char kMagic[4] = {'M', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void PutLE(std::vector<std::uint8_t>& out, std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t Checksum(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

class Cursor {
 public:
  Cursor(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

  std::uint64_t LE(int width) {
    Need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p_[at_ + i]) << (8 * i);
    at_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string Text(std::size_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(p_ + at_), n);
    at_ += n;
    return s;
  }
  const std::uint8_t* Take(std::size_t n) {
    Need(n);
    const auto* q = p_ + at_;
    at_ += n;
    return q;
  }
  bool Done() const { return at_ == n_; }

 private:
  void Need(std::size_t n) const {
    Require(n <= n_ - at_, ErrorKind::kCorruption, "checkpoint truncated");
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t at_ = 0;
};

}  // namespace

const Tensor& Checkpoint::Array(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return t;
  Fail(ErrorKind::kCorruption, "checkpoint has no array '" + name + "'");
}

std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& ck) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  PutLE(out, kVersion, 4);
  const std::string meta = ck.metadata.dump();
  PutLE(out, meta.size(), 4);
  out.insert(out.end(), meta.begin(), meta.end());
  PutLE(out, ck.arrays.size(), 4);
  for (const auto& [name, t] : ck.arrays) {
    Require(!name.empty() && name.size() < 65536 && t.ndim() < 256, ErrorKind::kConfig,
            "checkpoint array '" + name + "' cannot be stored");
    PutLE(out, name.size(), 2);
    out.insert(out.end(), name.begin(), name.end());
    PutLE(out, static_cast<std::uint64_t>(t.ndim()), 1);
    for (int d : t.shape()) PutLE(out, static_cast<std::uint32_t>(d), 4);
    for (float v : t.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      PutLE(out, bits, 4);
    }
  }
  PutLE(out, Checksum(out.data(), out.size()), 4);
  return out;
}

Checkpoint DecodeCheckpoint(const std::vector<std::uint8_t>& bytes) {
  Require(bytes.size() >= 16 && std::memcmp(bytes.data(), kMagic, 4) == 0,
          ErrorKind::kCorruption, "not a checkpoint archive");
  const std::size_t body = bytes.size() - 4;
  Cursor tail(bytes.data() + body, 4);
  Require(Checksum(bytes.data(), body) == tail.LE(4), ErrorKind::kCorruption,
          "checkpoint checksum mismatch");

  Cursor c(bytes.data() + 4, body - 4);
  const auto version = c.LE(4);
  Require(version == kVersion, ErrorKind::kCorruption,
          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const std::string meta = c.Text(c.LE(4));
  ck.metadata = nlohmann::json::parse(meta, nullptr, false);
  Require(!ck.metadata.is_discarded() && ck.metadata.is_object(), ErrorKind::kCorruption,
          "checkpoint metadata is not a JSON object");
  const auto count = c.LE(4);
  std::set<std::string> names;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = c.Text(c.LE(2));
    Require(names.insert(name).second, ErrorKind::kCorruption,
            "checkpoint repeats array '" + name + "'");
    const int ndim = static_cast<int>(c.LE(1));
    Shape shape;
    std::size_t elements = 1;
    for (int d = 0; d < ndim; ++d) {
      const auto dim = c.LE(4);
      Require(dim <= body, ErrorKind::kCorruption, "checkpoint dimension too large");
      shape.push_back(static_cast<int>(dim));
      elements *= dim;
      Require(elements <= body, ErrorKind::kCorruption, "checkpoint array too large");
    }
    const std::uint8_t* p = c.Take(elements * 4);
    std::vector<float> values(elements);
    for (std::size_t k = 0; k < elements; ++k) {
      const std::uint32_t bits = static_cast<std::uint32_t>(p[4 * k]) |
                                 static_cast<std::uint32_t>(p[4 * k + 1]) << 8 |
                                 static_cast<std::uint32_t>(p[4 * k + 2]) << 16 |
                                 static_cast<std::uint32_t>(p[4 * k + 3]) << 24;
      std::memcpy(&values[k], &bits, 4);
    }
    ck.arrays.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  Require(c.Done(), ErrorKind::kCorruption, "checkpoint has trailing bytes");
  return ck;
}

void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = EncodeCheckpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  Require(out.good(), ErrorKind::kIo, "write failed for " + path.string());
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorKind::kIo, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return DecodeCheckpoint(bytes);
}

void StoreParameters(model::MultiTaskModel& model, Checkpoint& ck) {
  for (nn::Parameter* p : model.AllParameters()) ck.arrays.emplace_back(p->name, p->value);
}

void LoadParameters(const Checkpoint& ck, model::MultiTaskModel& model) {
  for (nn::Parameter* p : model.AllParameters()) {
    const Tensor& t = ck.Array(p->name);
    Require(t.shape() == p->value.shape(), ErrorKind::kCorruption,
            "checkpoint array '" + p->name + "' has the wrong shape");
    p->value = t;
  }
}

}  // namespace mtsplit::cli
