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

#include "mtsplit/runtime/wire.h"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>

namespace mtsplit::runtime {
namespace {

void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void PutU64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t GetLE(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t Crc32(const std::uint8_t* data, std::size_t size) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(size)));
}

bool KnownType(std::uint8_t code) { return code >= 1 && code <= 7; }

DecodeResult Failure(ErrorKind kind, std::string message) {
  DecodeResult r;
  r.status = DecodeStatus::kError;
  r.error = kind;
  r.error_message = std::move(message);
  return r;
}

}  // namespace

std::size_t DTypeWidth(WireDType dtype) {
  switch (dtype) {
    case WireDType::kF32: return 4;
    case WireDType::kF16: return 2;
    case WireDType::kU8: return 1;
  }
  return 0;
}

const char* DTypeName(WireDType dtype) {
  switch (dtype) {
    case WireDType::kF32: return "f32";
    case WireDType::kF16: return "f16";
    case WireDType::kU8: return "u8";
  }
  return "?";
}

WireDType ParseDType(const std::string& name) {
  if (name == "f32") return WireDType::kF32;
  if (name == "f16") return WireDType::kF16;
  Fail(ErrorKind::kConfig, "unknown wire dtype '" + name + "' (expected f32 or f16)");
}

std::uint16_t FloatToHalf(float value) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const int exp = static_cast<int>((x >> 23) & 0xffu);
  std::uint32_t mant = x & 0x7fffffu;
  if (exp == 255)  // inf or NaN; NaN stays quiet
    return static_cast<std::uint16_t>(sign | 0x7c00u | (mant ? 0x200u | (mant >> 13) : 0u));
  const int e = exp - 127 + 15;
  if (e >= 31) return static_cast<std::uint16_t>(sign | 0x7c00u);
  if (e <= 0) {
    if (e < -10) return static_cast<std::uint16_t>(sign);
    mant |= 0x800000u;
    const int shift = 14 - e;
    std::uint32_t h = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1u);
    const std::uint32_t half = 1u << (shift - 1);
    if (rem > half || (rem == half && (h & 1u))) ++h;
    return static_cast<std::uint16_t>(sign | h);
  }
  std::uint32_t h = (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
  const std::uint32_t rem = mant & 0x1fffu;
  // A carry out of the mantissa correctly bumps the exponent, up to inf.
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;
  return static_cast<std::uint16_t>(sign | h);
}

float HalfToFloat(std::uint16_t bits) {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exp = (bits >> 10) & 0x1fu;
  const std::uint32_t mant = bits & 0x3ffu;
  if (exp == 0) {
    const float v = std::ldexp(static_cast<float>(mant), -24);
    return sign ? -v : v;
  }
  if (exp == 31) return std::bit_cast<float>(sign | 0x7f800000u | (mant << 13));
  return std::bit_cast<float>(sign | ((exp + 112u) << 23) | (mant << 13));
}

std::size_t FeatureTensor::NumElements() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

bool FeatureTensor::Valid() const {
  if (dims.size() > 255) return false;
  std::uint64_t n = 1;
  for (std::uint32_t d : dims) {
    if (d != 0 && n > kMaxFrameBytes / d) return false;
    n *= d;
  }
  return n * DTypeWidth(dtype) == data.size();
}

FeatureTensor FeatureTensor::FromTensor(const Tensor& tensor, WireDType dtype) {
  Require(dtype != WireDType::kU8, ErrorKind::kConfig,
          "numeric tensors travel as f32 or f16");
  FeatureTensor out;
  out.dtype = dtype;
  for (int d : tensor.shape()) out.dims.push_back(static_cast<std::uint32_t>(d));
  out.data.reserve(tensor.size() * DTypeWidth(dtype));
  for (float v : tensor.values()) {
    if (dtype == WireDType::kF32)
      PutU32(out.data, std::bit_cast<std::uint32_t>(v));
    else
      PutU16(out.data, FloatToHalf(v));
  }
  return out;
}

FeatureTensor FeatureTensor::FromBytes(std::span<const std::uint8_t> bytes) {
  FeatureTensor out;
  out.dtype = WireDType::kU8;
  out.dims = {static_cast<std::uint32_t>(bytes.size())};
  out.data.assign(bytes.begin(), bytes.end());
  return out;
}

FeatureTensor FeatureTensor::FromString(const std::string& text) {
  return FromBytes({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

Tensor FeatureTensor::ToTensor() const {
  Require(dtype != WireDType::kU8, ErrorKind::kProtocol,
          "expected a numeric tensor, got raw bytes");
  Require(Valid(), ErrorKind::kProtocol, "tensor payload does not match its dims");
  Shape shape;
  for (std::uint32_t d : dims) shape.push_back(static_cast<int>(d));
  std::vector<float> values(NumElements());
  const std::uint8_t* p = data.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (dtype == WireDType::kF32) {
      values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(GetLE(p + 4 * i, 4)));
    } else {
      values[i] = HalfToFloat(static_cast<std::uint16_t>(GetLE(p + 2 * i, 2)));
    }
  }
  return Tensor(std::move(shape), std::move(values));
}

std::string FeatureTensor::ToString() const {
  return std::string(data.begin(), data.end());
}

const char* MsgTypeName(MsgType type) {
  switch (type) {
    case MsgType::kHello: return "HELLO";
    case MsgType::kForwardFeatures: return "FORWARD_FEATURES";
    case MsgType::kBackwardGrads: return "BACKWARD_GRADS";
    case MsgType::kLabelsEnc: return "LABELS_ENC";
    case MsgType::kMetrics: return "METRICS";
    case MsgType::kControl: return "CONTROL";
    case MsgType::kBye: return "BYE";
  }
  return "?";
}

std::size_t SplitMessage::PayloadBytes() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.data.size();
  return n;
}

std::vector<std::uint8_t> EncodeMessage(const SplitMessage& message) {
  Require(KnownType(static_cast<std::uint8_t>(message.type)), ErrorKind::kProtocol,
          "unknown message type");
  Require(message.tensors.size() <= 0xffff, ErrorKind::kProtocol,
          "too many tensors in one message");
  std::size_t size = kFrameOverheadBytes;
  for (const auto& t : message.tensors) {
    Require(t.Valid(), ErrorKind::kProtocol,
            std::string("invalid ") + DTypeName(t.dtype) + " tensor: payload does not match dims");
    size += 2 + 4 * t.dims.size() + t.data.size();
  }
  Require(size <= kMaxFrameBytes, ErrorKind::kProtocol, "message exceeds the frame size limit");

  std::vector<std::uint8_t> out;
  out.reserve(size);
  out.insert(out.end(), kFrameMagic, kFrameMagic + 4);
  out.push_back(static_cast<std::uint8_t>(message.type));
  PutU64(out, message.session_id);
  PutU64(out, message.batch_index);
  PutU16(out, static_cast<std::uint16_t>(message.tensors.size()));
  for (const auto& t : message.tensors) {
    out.push_back(static_cast<std::uint8_t>(t.dtype));
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) PutU32(out, d);
    out.insert(out.end(), t.data.begin(), t.data.end());
  }
  PutU32(out, Crc32(out.data(), out.size()));
  return out;
}

DecodeResult TryDecodeMessage(std::span<const std::uint8_t> bytes) {
  const std::size_t avail = bytes.size();
  const std::uint8_t* p = bytes.data();
  if (avail == 0) return {};
  if (std::memcmp(p, kFrameMagic, std::min<std::size_t>(avail, 4)) != 0)
    return Failure(ErrorKind::kProtocol, "bad frame magic");
  if (avail < kFrameHeaderBytes) return {};

  // Walk the declared layout to find the frame end; nothing is trusted
  // until the checksum matches.
  const std::size_t count = GetLE(p + 21, 2);
  std::uint64_t pos = kFrameHeaderBytes;
  for (std::size_t i = 0; i < count; ++i) {
    if (avail < pos + 2) return {};
    const std::uint8_t code = p[pos];
    if (code > static_cast<std::uint8_t>(WireDType::kU8))
      return Failure(ErrorKind::kProtocol,
                     "unknown dtype code " + std::to_string(code) + " in tensor " +
                         std::to_string(i));
    const std::size_t ndim = p[pos + 1];
    pos += 2;
    if (avail < pos + 4 * ndim) return {};
    std::uint64_t elements = 1;
    for (std::size_t d = 0; d < ndim; ++d) {
      const std::uint64_t dim = GetLE(p + pos + 4 * d, 4);
      if (dim != 0 && elements > kMaxFrameBytes / dim)
        return Failure(ErrorKind::kProtocol, "tensor dims exceed the frame size limit");
      elements *= dim;
    }
    pos += 4 * ndim + elements * DTypeWidth(static_cast<WireDType>(code));
    if (pos + 4 > kMaxFrameBytes)
      return Failure(ErrorKind::kProtocol, "frame exceeds the size limit");
    if (avail < pos) return {};
  }
  if (avail < pos + 4) return {};

  const std::size_t body = static_cast<std::size_t>(pos);
  if (Crc32(p, body) != static_cast<std::uint32_t>(GetLE(p + body, 4))) {
    DecodeResult r = Failure(ErrorKind::kCorruption, "frame CRC mismatch");
    r.frame_bytes = body + 4;
    return r;
  }
  if (!KnownType(p[4]))
    return Failure(ErrorKind::kProtocol, "unknown message type " + std::to_string(p[4]));

  DecodeResult r;
  r.status = DecodeStatus::kOk;
  r.frame_bytes = body + 4;
  SplitMessage& m = r.message;
  m.type = static_cast<MsgType>(p[4]);
  m.session_id = GetLE(p + 5, 8);
  m.batch_index = GetLE(p + 13, 8);
  m.tensors.resize(count);
  pos = kFrameHeaderBytes;
  for (auto& t : m.tensors) {
    t.dtype = static_cast<WireDType>(p[pos]);
    const std::size_t ndim = p[pos + 1];
    pos += 2;
    for (std::size_t d = 0; d < ndim; ++d)
      t.dims.push_back(static_cast<std::uint32_t>(GetLE(p + pos + 4 * d, 4)));
    pos += 4 * ndim;
    const std::size_t n = t.NumElements() * DTypeWidth(t.dtype);
    t.data.assign(p + pos, p + pos + n);
    pos += n;
  }
  return r;
}

SplitMessage DecodeMessage(std::span<const std::uint8_t> bytes) {
  DecodeResult r = TryDecodeMessage(bytes);
  if (r.status == DecodeStatus::kIncomplete)
    Fail(ErrorKind::kIncomplete, "truncated frame (" + std::to_string(bytes.size()) + " bytes)");
  if (r.status == DecodeStatus::kError) Fail(r.error, r.error_message);
  Require(r.frame_bytes == bytes.size(), ErrorKind::kProtocol,
          std::to_string(bytes.size() - r.frame_bytes) + " trailing bytes after the frame");
  return std::move(r.message);
}

}  // namespace mtsplit::runtime
