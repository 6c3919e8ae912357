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

#include "mtsplit/runtime/crypto.h"

#include <sodium.h>

#include <bit>

#include "mtsplit/error.h"

namespace mtsplit::runtime {
namespace {

void EnsureSodium() {
  static const int rc = sodium_init();
  Require(rc >= 0, ErrorKind::kIo, "libsodium failed to initialise");
}

std::array<std::uint8_t, 16> Context(std::uint64_t session_id, std::uint64_t index) {
  std::array<std::uint8_t, 16> ad{};
  for (int i = 0; i < 8; ++i) {
    ad[i] = static_cast<std::uint8_t>(session_id >> (8 * i));
    ad[8 + i] = static_cast<std::uint8_t>(index >> (8 * i));
  }
  return ad;
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

SessionKey::SessionKey(const std::string& passphrase) {
  Require(!passphrase.empty(), ErrorKind::kConfig, "runtime.key must not be empty");
  EnsureSodium();
  static constexpr char kDomain[] = "mtsplit label key v1";
  crypto_generichash(key_.data(), key_.size(),
                     reinterpret_cast<const unsigned char*>(passphrase.data()),
                     passphrase.size(), reinterpret_cast<const unsigned char*>(kDomain),
                     sizeof(kDomain) - 1);
}

std::array<std::uint8_t, 32> SessionKey::HelloTag(char role,
                                                  std::uint64_t session_id) const {
  std::vector<std::uint8_t> msg = {'h', 'e', 'l', 'l', 'o', static_cast<std::uint8_t>(role)};
  const auto ctx = Context(session_id, 0);
  msg.insert(msg.end(), ctx.begin(), ctx.begin() + 8);
  std::array<std::uint8_t, 32> tag{};
  crypto_generichash(tag.data(), tag.size(), msg.data(), msg.size(), key_.data(),
                     key_.size());
  return tag;
}

std::vector<std::uint8_t> SessionKey::Seal(std::span<const std::uint8_t> plaintext,
                                           std::uint64_t session_id,
                                           std::uint64_t index) const {
  constexpr std::size_t kNonce = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  std::vector<std::uint8_t> out(kNonce + plaintext.size() +
                                crypto_aead_xchacha20poly1305_ietf_ABYTES);
  randombytes_buf(out.data(), kNonce);
  const auto ad = Context(session_id, index);
  unsigned long long written = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(out.data() + kNonce, &written,
                                             plaintext.data(), plaintext.size(), ad.data(),
                                             ad.size(), nullptr, out.data(), key_.data());
  out.resize(kNonce + written);
  return out;
}

std::vector<std::uint8_t> SessionKey::Open(std::span<const std::uint8_t> sealed,
                                           std::uint64_t session_id,
                                           std::uint64_t index) const {
  constexpr std::size_t kNonce = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  constexpr std::size_t kTag = crypto_aead_xchacha20poly1305_ietf_ABYTES;
  Require(sealed.size() >= kNonce + kTag, ErrorKind::kSession,
          "label decryption failed: ciphertext too short");
  std::vector<std::uint8_t> out(sealed.size() - kNonce - kTag);
  const auto ad = Context(session_id, index);
  unsigned long long written = 0;
  const int rc = crypto_aead_xchacha20poly1305_ietf_decrypt(
      out.data(), &written, nullptr, sealed.data() + kNonce, sealed.size() - kNonce,
      ad.data(), ad.size(), sealed.data(), key_.data());
  Require(rc == 0, ErrorKind::kSession,
          "label decryption failed: wrong key or tampered ciphertext");
  out.resize(written);
  return out;
}

std::vector<std::uint8_t> EncodeTargets(const objectives::TaskTarget& target) {
  const bool labels = target.values.empty();
  const Shape& shape = labels ? target.labels.shape : target.values.shape();
  std::vector<std::uint8_t> out = {static_cast<std::uint8_t>(labels ? 0 : 1),
                                   static_cast<std::uint8_t>(shape.size())};
  for (int d : shape) PutU32(out, static_cast<std::uint32_t>(d));
  if (labels) {
    for (std::int32_t v : target.labels.values) PutU32(out, static_cast<std::uint32_t>(v));
  } else {
    for (float v : target.values.values()) PutU32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

objectives::TaskTarget DecodeTargets(std::span<const std::uint8_t> bytes) {
  Require(bytes.size() >= 2 && bytes[0] <= 1, ErrorKind::kProtocol, "malformed label block");
  const std::size_t ndim = bytes[1];
  Require(ndim >= 1 && bytes.size() >= 2 + 4 * ndim, ErrorKind::kProtocol,
          "malformed label block");
  Shape shape;
  std::size_t n = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    const std::uint32_t dim = GetU32(bytes.data() + 2 + 4 * d);
    Require(dim <= bytes.size() && n * dim <= bytes.size(), ErrorKind::kProtocol,
            "label block size does not match its shape");
    shape.push_back(static_cast<int>(dim));
    n *= dim;
  }
  const std::uint8_t* p = bytes.data() + 2 + 4 * ndim;
  Require(bytes.size() == 2 + 4 * ndim + 4 * n, ErrorKind::kProtocol,
          "label block size does not match its shape");
  objectives::TaskTarget target;
  if (bytes[0] == 0) {
    std::vector<std::int32_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::int32_t>(GetU32(p + 4 * i));
    target.labels = LabelTensor(shape, std::move(v));
  } else {
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(GetU32(p + 4 * i));
    target.values = Tensor(shape, std::move(v));
  }
  return target;
}

}  // namespace mtsplit::runtime
