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

#ifndef MTSPLIT_RUNTIME_CHANNEL_H_
#define MTSPLIT_RUNTIME_CHANNEL_H_

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "mtsplit/runtime/transport.h"
#include "mtsplit/runtime/wire.h"

namespace mtsplit::runtime {

struct ChannelStats {
  long frames_sent = 0;
  long frames_received = 0;
  long nacks_sent = 0;
  long resends = 0;
};

// Framed message exchange for one session. Corrupt frames are answered
// with a NACK and the peer resends its last frame; NACK and abort control
// records never surface to the caller.
class Channel {
 public:
  Channel(TcpStream stream, std::uint64_t session_id);

  std::uint64_t session_id() const { return session_id_; }
  const ChannelStats& stats() const { return stats_; }

  // Stamps the session id and sends one frame.
  void Send(SplitMessage message);
  // Throws kSession on timeout, closed stream or peer abort, kProtocol on
  // malformed frames or a foreign session id.
  SplitMessage Receive(double timeout_seconds);
  // Best-effort abort notice to the peer.
  void Abort(const std::string& reason) noexcept;
  void Close() { stream_.Close(); }

  // Every frame sent or received, in order.
  void SetCapture(std::vector<std::vector<std::uint8_t>>* capture) { capture_ = capture; }
  void SetDumpFile(const std::string& path);
  // Fault injection: flips one payload bit of the next frame on the wire.
  // The clean frame is kept for the resend.
  void CorruptNextSend() { corrupt_next_ = true; }

 private:
  void Record(std::span<const std::uint8_t> frame);
  void SendControl(const std::string& json);

  TcpStream stream_;
  std::uint64_t session_id_;
  std::vector<std::uint8_t> buffer_;
  std::vector<std::uint8_t> last_frame_;
  ChannelStats stats_;
  std::vector<std::vector<std::uint8_t>>* capture_ = nullptr;
  std::ofstream dump_;
  bool corrupt_next_ = false;
};

SplitMessage ControlMessage(const std::string& json, std::uint64_t batch_index = 0);

}  // namespace mtsplit::runtime

#endif  // MTSPLIT_RUNTIME_CHANNEL_H_
