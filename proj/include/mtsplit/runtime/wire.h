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

#ifndef MTSPLIT_RUNTIME_WIRE_H_
#define MTSPLIT_RUNTIME_WIRE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtsplit/error.h"
#include "mtsplit/tensor.h"

namespace mtsplit::runtime {

// Element encodings on the wire. kU8 carries opaque bytes (ciphertext,
// JSON control records) alongside the numeric feature types.
enum class WireDType : std::uint8_t { kF32 = 0, kF16 = 1, kU8 = 2 };

std::size_t DTypeWidth(WireDType dtype);
const char* DTypeName(WireDType dtype);
WireDType ParseDType(const std::string& name);  // "f32" or "f16"

// IEEE binary16 conversion, round to nearest even.
std::uint16_t FloatToHalf(float value);
float HalfToFloat(std::uint16_t bits);

struct FeatureTensor {
  WireDType dtype = WireDType::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;  // little-endian payload

  std::size_t NumElements() const;
  // True when data holds exactly NumElements() * width bytes.
  bool Valid() const;

  static FeatureTensor FromTensor(const Tensor& tensor,
                                  WireDType dtype = WireDType::kF32);
  static FeatureTensor FromBytes(std::span<const std::uint8_t> bytes);
  static FeatureTensor FromString(const std::string& text);
  // Numeric payloads only.
  Tensor ToTensor() const;
  std::string ToString() const;

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;
};

enum class MsgType : std::uint8_t {
  kHello = 1,
  kForwardFeatures = 2,
  kBackwardGrads = 3,
  kLabelsEnc = 4,
  kMetrics = 5,
  kControl = 6,
  kBye = 7,
};

const char* MsgTypeName(MsgType type);

struct SplitMessage {
  MsgType type = MsgType::kControl;
  std::uint64_t session_id = 0;
  std::uint64_t batch_index = 0;
  std::vector<FeatureTensor> tensors;

  std::size_t PayloadBytes() const;

  friend bool operator==(const SplitMessage&, const SplitMessage&) = default;
};

inline constexpr char kFrameMagic[4] = {'M', 'M', '0', '1'};
inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 8 + 8 + 2;
inline constexpr std::size_t kFrameOverheadBytes = kFrameHeaderBytes + 4;
// Frames declaring more than this are rejected before any allocation.
inline constexpr std::uint64_t kMaxFrameBytes = 1ULL << 30;

std::vector<std::uint8_t> EncodeMessage(const SplitMessage& message);

enum class DecodeStatus { kOk, kIncomplete, kError };

struct DecodeResult {
  DecodeStatus status = DecodeStatus::kIncomplete;
  SplitMessage message;
  // Bytes taken by the frame. Set for kOk and for CRC failures, where the
  // frame boundary is still known and the caller may skip it.
  std::size_t frame_bytes = 0;
  ErrorKind error = ErrorKind::kProtocol;
  std::string error_message;
};

// Never throws on malformed input.
DecodeResult TryDecodeMessage(std::span<const std::uint8_t> bytes);

// Throwing variant for a buffer that must hold exactly one frame.
SplitMessage DecodeMessage(std::span<const std::uint8_t> bytes);

}  // namespace mtsplit::runtime

#endif  // MTSPLIT_RUNTIME_WIRE_H_
