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

#ifndef MTSPLIT_RUNTIME_CRYPTO_H_
#define MTSPLIT_RUNTIME_CRYPTO_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtsplit/objectives/losses.h"

namespace mtsplit::runtime {

// Pre-shared session key. The config passphrase is hashed into a 256-bit
// key for XChaCha20-Poly1305.
class SessionKey {
 public:
  explicit SessionKey(const std::string& passphrase);

  // Key-confirmation tag; role distinguishes the two directions.
  std::array<std::uint8_t, 32> HelloTag(char role, std::uint64_t session_id) const;

  // nonce | ciphertext | tag, authenticated over (session_id, index).
  std::vector<std::uint8_t> Seal(std::span<const std::uint8_t> plaintext,
                                 std::uint64_t session_id, std::uint64_t index) const;
  // Throws kSession when authentication fails.
  std::vector<std::uint8_t> Open(std::span<const std::uint8_t> sealed,
                                 std::uint64_t session_id, std::uint64_t index) const;

 private:
  std::array<std::uint8_t, 32> key_{};
};

// Plaintext layout of one task's targets: kind byte (0 int32 labels,
// 1 f32 values), ndim byte, u32 LE dims, LE payload.
std::vector<std::uint8_t> EncodeTargets(const objectives::TaskTarget& target);
// Throws kProtocol on malformed input.
objectives::TaskTarget DecodeTargets(std::span<const std::uint8_t> bytes);

}  // namespace mtsplit::runtime

#endif  // MTSPLIT_RUNTIME_CRYPTO_H_
