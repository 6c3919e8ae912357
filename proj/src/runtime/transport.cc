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

#include "mtsplit/runtime/transport.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "mtsplit/error.h"

namespace mtsplit::runtime {
namespace {

std::string Errno(const std::string& what) { return what + ": " + std::strerror(errno); }

int TimeoutMs(double seconds) {
  if (seconds < 0) return -1;
  return static_cast<int>(std::min(seconds * 1000.0, 2.0e9));
}

// Waits for the given poll event; false on timeout.
bool Wait(int fd, short events, double timeout_seconds) {
  pollfd pfd{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&pfd, 1, TimeoutMs(timeout_seconds));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) Fail(ErrorKind::kIo, Errno("poll"));
  }
}

addrinfo* Resolve(const Endpoint& endpoint, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* result = nullptr;
  const std::string port = std::to_string(endpoint.port);
  const int rc = ::getaddrinfo(endpoint.host.empty() ? nullptr : endpoint.host.c_str(),
                               port.c_str(), &hints, &result);
  Require(rc == 0, ErrorKind::kConfig,
          "cannot resolve " + EndpointToString(endpoint) + ": " + gai_strerror(rc));
  return result;
}

}  // namespace

Endpoint ParseEndpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  Require(colon != std::string::npos && colon + 1 < text.size(), ErrorKind::kConfig,
          "endpoint '" + text + "' is not host:port");
  Endpoint e;
  e.host = text.substr(0, colon);
  if (e.host.size() >= 2 && e.host.front() == '[' && e.host.back() == ']')
    e.host = e.host.substr(1, e.host.size() - 2);
  const std::string port = text.substr(colon + 1);
  Require(port.find_first_not_of("0123456789") == std::string::npos && port.size() <= 5,
          ErrorKind::kConfig, "endpoint '" + text + "' has a non-numeric port");
  e.port = std::stoi(port);
  Require(e.port <= 65535, ErrorKind::kConfig, "endpoint '" + text + "': port out of range");
  return e;
}

std::string EndpointToString(const Endpoint& endpoint) {
  return endpoint.host + ":" + std::to_string(endpoint.port);
}

TcpStream::TcpStream(int fd) : fd_(fd) {
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpStream::~TcpStream() { Close(); }

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
  if (this != &other) {
    Close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void TcpStream::Close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

TcpStream TcpStream::Connect(const Endpoint& endpoint, double timeout_seconds) {
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(timeout_seconds);
  std::string last_error = "no address";
  for (;;) {
    addrinfo* list = Resolve(endpoint, false);
    for (addrinfo* ai = list; ai != nullptr; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        ::freeaddrinfo(list);
        return TcpStream(fd);
      }
      last_error = std::strerror(errno);
      ::close(fd);
    }
    ::freeaddrinfo(list);
    if (std::chrono::steady_clock::now() >= deadline)
      Fail(ErrorKind::kSession,
           "cannot connect to " + EndpointToString(endpoint) + ": " + last_error);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

void TcpStream::SendAll(std::span<const std::uint8_t> bytes) {
  Require(is_open(), ErrorKind::kIo, "send on a closed stream");
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      Fail(ErrorKind::kIo, Errno("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t TcpStream::Receive(std::span<std::uint8_t> buffer, double timeout_seconds) {
  Require(is_open(), ErrorKind::kIo, "receive on a closed stream");
  if (!Wait(fd_, POLLIN, timeout_seconds))
    Fail(ErrorKind::kSession, "timed out waiting for the peer");
  for (;;) {
    const ssize_t n = ::recv(fd_, buffer.data(), buffer.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET) return 0;
    Fail(ErrorKind::kIo, Errno("recv"));
  }
}

TcpListener::TcpListener(const Endpoint& endpoint) {
  addrinfo* list = Resolve(endpoint, true);
  std::string last_error = "no address";
  for (addrinfo* ai = list; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 8) == 0) {
      fd_ = fd;
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(list);
  Require(fd_ >= 0, ErrorKind::kSession,
          "cannot listen on " + EndpointToString(endpoint) + ": " + last_error);
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = addr.ss_family == AF_INET6
              ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
              : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

TcpStream TcpListener::Accept(double timeout_seconds) {
  if (!Wait(fd_, POLLIN, timeout_seconds))
    Fail(ErrorKind::kSession, "timed out waiting for a consumer to connect");
  for (;;) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return TcpStream(fd);
    if (errno != EINTR) Fail(ErrorKind::kIo, Errno("accept"));
  }
}

}  // namespace mtsplit::runtime
