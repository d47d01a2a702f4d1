// Copyright 2026 The jsdseg Authors
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

// Edge -> cloud transport.
//
// Container (big-endian):
//   "JSDC" | version u8 | flags u8 (bit 0: fused model) | model_id u16 |
//   H u32 | W u32 (the image before padding) |
//   h rows u16 | h cols u16 | channels u16 |
//   len_b_h u32 | len_b_r u32 | b_h | b_r | CRC-32 of all preceding bytes
//
// The edge pads the image to a multiple of 64 by edge replication; the cloud
// crops the mask back to H x W.
//
// Server frames: u32 length + payload, both directions. A request payload is
// one container. A response payload is
//   status u8 | H u32 | W u32 | body
// with status 0 ok (body = run-length mask), 1 CRC or malformed frame,
// 2 unknown model_id, 3 internal error (body = UTF-8 message for 1..3).

#ifndef JSDSEG_WIRE_H_
#define JSDSEG_WIRE_H_

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "jsdseg/config.h"
#include "jsdseg/image.h"
#include "jsdseg/model.h"

namespace jsd {

inline constexpr uint8_t kContainerVersion = 1;
inline constexpr uint8_t kContainerFusedFlag = 0x01;
inline constexpr size_t kContainerOverhead = 4 + 1 + 1 + 2 + 4 + 4 + 2 + 2 + 2 + 4 + 4 + 4;
inline constexpr uint32_t kMaxFrameBytes = 64u << 20;

struct Container {
  uint8_t version = kContainerVersion;
  uint8_t flags = 0;
  uint16_t model_id = 0;
  uint32_t height = 0, width = 0;
  uint16_t h_rows = 0, h_cols = 0, channels = 0;
  std::vector<uint8_t> b_h, b_r;

  size_t payload_bytes() const { return b_h.size() + b_r.size(); }
  double bpp() const { return 8.0 * double(payload_bytes()) / (double(height) * double(width)); }
  friend bool operator==(const Container&, const Container&) = default;
};

std::vector<uint8_t> SerializeContainer(const Container& c);
// TransportError on a CRC mismatch, ProtocolError on any structural defect.
Container ParseContainer(std::span<const uint8_t> bytes);

// Edge side: E + SE, hyper-latent coding, HD for the Gaussian tables, latent
// coding. Deterministic.
Container EdgeEncode(Model& model, const Image& image);

// Cloud side: decodes h, recomputes the scales, decodes r and runs JD.
// ProtocolError when the container belongs to another model.
Mask CloudDecode(Model& model, const Container& container, Tensor* logits = nullptr);

// The whole pipeline in one process, without bytes.
Mask SegmentImage(Model& model, const Image& image);

// Runs of (label u8, length as unsigned LEB128).
std::vector<uint8_t> EncodeMaskRle(const Mask& mask);
// DecodeError on truncation, overrun or zero-length runs.
Mask DecodeMaskRle(std::span<const uint8_t> bytes, int64_t height, int64_t width);

enum class ResponseStatus : uint8_t { kOk = 0, kMalformed = 1, kUnknownModel = 2, kInternal = 3 };

struct Response {
  ResponseStatus status = ResponseStatus::kOk;
  Mask mask;
  std::string message;
};

std::vector<uint8_t> SerializeResponse(const Response& r);
Response ParseResponse(std::span<const uint8_t> bytes);

// Models keyed by model_id, shared read-only between connections.
class ModelRegistry {
 public:
  // ConfigError on a duplicate id or a model without entropy tables.
  void Add(std::shared_ptr<Model> model);
  std::shared_ptr<Model> Find(uint16_t id) const;
  size_t size() const { return models_.size(); }

 private:
  std::map<uint16_t, std::shared_ptr<Model>> models_;
};

// One request frame payload -> one response frame payload. Never throws.
std::vector<uint8_t> HandleRequest(const ModelRegistry& registry, std::span<const uint8_t> request);

// "host:port"; JSD_LISTEN in the environment overrides `configured`.
std::string ResolveListenAddress(const std::string& configured);

class Server {
 public:
  Server(std::shared_ptr<const ModelRegistry> registry, ServeConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts the acceptor. TransportError if binding fails.
  void Start();
  void Stop();
  uint16_t port() const { return port_; }
  int64_t served() const { return served_.load(); }

 private:
  void AcceptLoop();
  void Serve(int fd);

  std::shared_ptr<const ModelRegistry> registry_;
  ServeConfig config_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<int> active_{0};
  std::atomic<int64_t> served_{0};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
};

// Synchronous client: one connection, request/response in order.
class Client {
 public:
  // TransportError if the connection cannot be made.
  Client(const std::string& address, int timeout_ms = 30000);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  std::vector<uint8_t> Exchange(std::span<const uint8_t> payload);
  Response Segment(const Container& container);

 private:
  int fd_ = -1;
};

}  // namespace jsd

#endif  // JSDSEG_WIRE_H_
