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

#include "mtsplit/runtime/channel.h"

#include <chrono>

#include <nlohmann/json.hpp>

#include "mtsplit/error.h"

namespace mtsplit::runtime {

SplitMessage ControlMessage(const std::string& json, std::uint64_t batch_index) {
  SplitMessage m;
  m.type = MsgType::kControl;
  m.batch_index = batch_index;
  m.tensors.push_back(FeatureTensor::FromString(json));
  return m;
}

Channel::Channel(TcpStream stream, std::uint64_t session_id)
    : stream_(std::move(stream)), session_id_(session_id) {}

void Channel::SetDumpFile(const std::string& path) {
  dump_.open(path, std::ios::binary | std::ios::trunc);
  Require(dump_.good(), ErrorKind::kIo, "cannot write traffic dump " + path);
}

void Channel::Record(std::span<const std::uint8_t> frame) {
  if (capture_) capture_->emplace_back(frame.begin(), frame.end());
  if (dump_.is_open())
    dump_.write(reinterpret_cast<const char*>(frame.data()),
                static_cast<std::streamsize>(frame.size()));
}

void Channel::Send(SplitMessage message) {
  message.session_id = session_id_;
  last_frame_ = EncodeMessage(message);
  Record(last_frame_);
  ++stats_.frames_sent;
  if (corrupt_next_) {
    corrupt_next_ = false;
    std::vector<std::uint8_t> bad = last_frame_;
    bad[bad.size() - 5] ^= 0x01;  // last byte before the CRC
    stream_.SendAll(bad);
    return;
  }
  stream_.SendAll(last_frame_);
}

void Channel::SendControl(const std::string& json) {
  const auto frame = [&] {
    SplitMessage m = ControlMessage(json);
    m.session_id = session_id_;
    return EncodeMessage(m);
  }();
  Record(frame);
  stream_.SendAll(frame);
}

void Channel::Abort(const std::string& reason) noexcept {
  try {
    SendControl(nlohmann::json{{"op", "abort"}, {"reason", reason}}.dump());
  } catch (...) {
  }
}

SplitMessage Channel::Receive(double timeout_seconds) {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::duration<double>(timeout_seconds);
  std::vector<std::uint8_t> chunk(1 << 16);
  for (;;) {
    DecodeResult r = TryDecodeMessage(buffer_);
    if (r.status == DecodeStatus::kError && r.error == ErrorKind::kCorruption) {
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<long>(r.frame_bytes));
      ++stats_.nacks_sent;
      SendControl(nlohmann::json{{"op", "nack"}}.dump());
      continue;
    }
    if (r.status == DecodeStatus::kError) Fail(r.error, r.error_message);
    if (r.status == DecodeStatus::kOk) {
      Record({buffer_.data(), r.frame_bytes});
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<long>(r.frame_bytes));
      ++stats_.frames_received;
      SplitMessage& m = r.message;
      Require(m.session_id == session_id_, ErrorKind::kProtocol,
              "frame for session " + std::to_string(m.session_id) + " on session " +
                  std::to_string(session_id_));
      if (m.type != MsgType::kControl) return std::move(m);
      nlohmann::json body;
      if (m.tensors.size() == 1 && m.tensors[0].dtype == WireDType::kU8)
        body = nlohmann::json::parse(m.tensors[0].ToString(), nullptr, false);
      const std::string op = body.is_object() ? body.value("op", "") : "";
      if (op == "nack") {
        Require(!last_frame_.empty(), ErrorKind::kProtocol, "NACK before any frame was sent");
        ++stats_.resends;
        stream_.SendAll(last_frame_);
        continue;
      }
      if (op == "abort") Fail(ErrorKind::kSession, "peer aborted: " + body.value("reason", "?"));
      return std::move(m);
    }
    const double left =
        std::chrono::duration<double>(deadline - Clock::now()).count();
    if (left <= 0) Fail(ErrorKind::kSession, "timed out waiting for the peer");
    const std::size_t n = stream_.Receive(chunk, left);
    if (n == 0) Fail(ErrorKind::kSession, "peer closed the connection");
    buffer_.insert(buffer_.end(), chunk.begin(), chunk.begin() + static_cast<long>(n));
  }
}

}  // namespace mtsplit::runtime
