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

#ifndef MTSPLIT_RUNTIME_TRANSPORT_H_
#define MTSPLIT_RUNTIME_TRANSPORT_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace mtsplit::runtime {

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;
};

// "host:port"; throws kConfig on malformed input.
Endpoint ParseEndpoint(const std::string& text);
std::string EndpointToString(const Endpoint& endpoint);

// Ordered reliable byte stream over a connected TCP socket. Move-only.
class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd);
  ~TcpStream();
  TcpStream(TcpStream&& other) noexcept;
  TcpStream& operator=(TcpStream&& other) noexcept;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  // Retries refused connections until the timeout runs out (kSession).
  static TcpStream Connect(const Endpoint& endpoint, double timeout_seconds);

  bool is_open() const { return fd_ >= 0; }
  // Writes everything or throws kIo.
  void SendAll(std::span<const std::uint8_t> bytes);
  // Reads what is available, waiting up to the timeout. Returns 0 at end of
  // stream; throws kSession on timeout.
  std::size_t Receive(std::span<std::uint8_t> buffer, double timeout_seconds);
  void Close();

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  // Port 0 binds an ephemeral port; see port().
  explicit TcpListener(const Endpoint& endpoint);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  // Throws kSession on timeout.
  TcpStream Accept(double timeout_seconds);

 private:
  int fd_ = -1;
  int port_ = 0;
};

}  // namespace mtsplit::runtime

#endif  // MTSPLIT_RUNTIME_TRANSPORT_H_
