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

#include "jsdseg/wire.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>

#include "jsdseg/bytes.h"
#include "jsdseg/errors.h"
#include "jsdseg/range_coder.h"

namespace jsd {

namespace {

constexpr char kMagic[4] = {'J', 'S', 'D', 'C'};

std::vector<const CdfTable*> HyperTablePointers(const Model& model, const Shape& h_shape) {
  const auto& tables = model.hyper_tables();
  const int64_t c = h_shape[1], plane = h_shape[2] * h_shape[3];
  std::vector<const CdfTable*> out(static_cast<size_t>(c * plane));
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < plane; ++i) out[static_cast<size_t>(ch * plane + i)] = &tables[static_cast<size_t>(ch)];
  return out;
}

std::vector<const CdfTable*> LatentTablePointers(const Model& model, const std::vector<uint32_t>& idx) {
  const auto& tables = model.conditional().tables();
  std::vector<const CdfTable*> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = &tables[idx[i]];
  return out;
}

void SplitAddress(const std::string& address, std::string* host, std::string* port) {
  const size_t colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw ConfigError("address must be host:port, got '" + address + "'");
  }
  *host = address.substr(0, colon);
  *port = address.substr(colon + 1);
  if (host->empty()) *host = "0.0.0.0";
}

addrinfo* Resolve(const std::string& address, bool passive) {
  std::string host, port;
  SplitAddress(address, &host, &port);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const int rc = getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) throw TransportError("cannot resolve " + address + ": " + gai_strerror(rc));
  return res;
}

// false on orderly EOF before the first byte; TransportError otherwise.
bool ReadExact(int fd, uint8_t* dst, size_t n, bool eof_ok) {
  size_t got = 0;
  while (got < n) {
    const ssize_t k = ::recv(fd, dst + got, n - got, 0);
    if (k == 0) {
      if (got == 0 && eof_ok) return false;
      throw TransportError("connection closed mid-frame");
    }
    if (k < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw TransportError("timed out");
      throw TransportError(std::string("recv: ") + std::strerror(errno));
    }
    got += static_cast<size_t>(k);
  }
  return true;
}

void WriteAll(int fd, const uint8_t* src, size_t n) {
  size_t sent = 0;
  while (sent < n) {
    const ssize_t k = ::send(fd, src + sent, n - sent, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send: ") + std::strerror(errno));
    }
    sent += static_cast<size_t>(k);
  }
}

void WriteFrame(int fd, std::span<const uint8_t> payload) {
  ByteWriter w(Endian::kBig);
  w.U32(static_cast<uint32_t>(payload.size()));
  w.Raw(payload);
  WriteAll(fd, w.bytes().data(), w.size());
}

// Empty optional on EOF between frames.
bool ReadFrame(int fd, std::vector<uint8_t>* payload) {
  uint8_t len[4];
  if (!ReadExact(fd, len, 4, true)) return false;
  const uint32_t n = (uint32_t(len[0]) << 24) | (uint32_t(len[1]) << 16) | (uint32_t(len[2]) << 8) | len[3];
  if (n > kMaxFrameBytes) throw ProtocolError("frame of " + std::to_string(n) + " bytes exceeds the limit");
  payload->resize(n);
  if (n) ReadExact(fd, payload->data(), n, false);
  return true;
}

void SetTimeout(int fd, int timeout_ms) {
  timeval tv{};
  tv.tv_sec = timeout_ms / 1000;
  tv.tv_usec = (timeout_ms % 1000) * 1000;
  setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

Response ErrorResponse(ResponseStatus status, const std::string& message) {
  Response r;
  r.status = status;
  r.message = message;
  return r;
}

}  // namespace

// ---------------------------------------------------------------- container

std::vector<uint8_t> SerializeContainer(const Container& c) {
  ByteWriter w(Endian::kBig);
  w.Raw(std::string_view(kMagic, 4));
  w.U8(c.version);
  w.U8(c.flags);
  w.U16(c.model_id);
  w.U32(c.height);
  w.U32(c.width);
  w.U16(c.h_rows);
  w.U16(c.h_cols);
  w.U16(c.channels);
  w.U32(static_cast<uint32_t>(c.b_h.size()));
  w.U32(static_cast<uint32_t>(c.b_r.size()));
  w.Raw(c.b_h);
  w.Raw(c.b_r);
  w.U32(Crc32(w.bytes()));
  return w.Take();
}

Container ParseContainer(std::span<const uint8_t> bytes) {
  if (bytes.size() < kContainerOverhead) {
    throw ProtocolError("container of " + std::to_string(bytes.size()) + " bytes is shorter than its header");
  }
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader tail(bytes.last(4), Endian::kBig, ErrorKind::kProtocol);
  if (Crc32(body) != tail.U32()) throw TransportError("container CRC mismatch");

  ByteReader r(body, Endian::kBig, ErrorKind::kProtocol);
  if (r.String(4) != std::string_view(kMagic, 4)) throw ProtocolError("bad container magic");
  Container c;
  c.version = r.U8();
  if (c.version != kContainerVersion) throw ProtocolError("unsupported container version " + std::to_string(c.version));
  c.flags = r.U8();
  c.model_id = r.U16();
  c.height = r.U32();
  c.width = r.U32();
  c.h_rows = r.U16();
  c.h_cols = r.U16();
  c.channels = r.U16();
  const uint32_t len_h = r.U32(), len_r = r.U32();
  if (uint64_t(len_h) + len_r != r.remaining()) throw ProtocolError("container lengths do not match its payload");
  const auto bh = r.Raw(len_h), br = r.Raw(len_r);
  c.b_h.assign(bh.begin(), bh.end());
  c.b_r.assign(br.begin(), br.end());
  if (c.height == 0 || c.width == 0 || c.channels == 0) throw ProtocolError("container has empty dimensions");
  const uint64_t s = ModelConfig::kHyperStride;
  if ((c.height + s - 1) / s != c.h_rows || (c.width + s - 1) / s != c.h_cols) {
    throw ProtocolError("container latent grid does not match the image size");
  }
  return c;
}

// ------------------------------------------------------------- edge / cloud

Container EdgeEncode(Model& model, const Image& image) {
  if (!model.tables_ready()) throw StateError("edge encode: no trained model loaded");
  if (image.height < 1 || image.width < 1) throw ConfigError("edge encode: empty image");
  if (image.height > 16384 || image.width > 16384) {
    throw ConfigError("edge encode: image larger than 16384 pixels per side");
  }
  const Image padded = PadToMultiple(image, ModelConfig::kHyperStride);
  const QuantizedLatents q = model.Quantize(padded.ToTensor());
  Container c;
  c.flags = model.fused() ? kContainerFusedFlag : 0;
  c.model_id = static_cast<uint16_t>(model.config().model_id);
  c.height = static_cast<uint32_t>(image.height);
  c.width = static_cast<uint32_t>(image.width);
  c.h_rows = static_cast<uint16_t>(q.h_shape[2]);
  c.h_cols = static_cast<uint16_t>(q.h_shape[3]);
  c.channels = static_cast<uint16_t>(q.h_shape[1]);
  c.b_h = RangeEncode(q.h, HyperTablePointers(model, q.h_shape)).bytes;
  c.b_r = RangeEncode(q.r, LatentTablePointers(model, q.r_tables)).bytes;
  return c;
}

Mask CloudDecode(Model& model, const Container& c, Tensor* logits_out) {
  if (c.model_id != model.config().model_id) {
    throw ProtocolError("container model_id " + std::to_string(c.model_id) + " does not match loaded model " +
                        std::to_string(model.config().model_id));
  }
  if (c.channels != model.config().feature_maps) throw ProtocolError("container channel count does not match the model");
  const int64_t s = ModelConfig::kHyperStride;
  const int64_t ph = int64_t(c.h_rows) * s, pw = int64_t(c.h_cols) * s;
  if (c.height > ph || c.width > pw || c.height + s <= ph || c.width + s <= pw) {
    throw ProtocolError("container latent grid does not match the image size");
  }
  const Shape h_shape{1, c.channels, c.h_rows, c.h_cols};
  const auto h_tables = HyperTablePointers(model, h_shape);
  const std::vector<int32_t> h = RangeDecode(c.b_h, h_tables, h_tables.size());
  const Tensor sigma = model.HyperScales(h, h_shape);
  const auto idx = model.ScaleIndices(sigma);
  const auto r_tables = LatentTablePointers(model, idx);
  const std::vector<int32_t> r = RangeDecode(c.b_r, r_tables, r_tables.size());
  Tensor logits = model.Segment(r, sigma.shape(), ph, pw);
  Mask m = MaskFromLogits(logits, c.height, c.width);
  if (logits_out) *logits_out = logits;
  return m;
}

Mask SegmentImage(Model& model, const Image& image) {
  const Image padded = PadToMultiple(image, ModelConfig::kHyperStride);
  const QuantizedLatents q = model.Quantize(padded.ToTensor());
  Tensor logits = model.Segment(q.r, q.r_shape, padded.height, padded.width);
  return MaskFromLogits(logits, image.height, image.width);
}

// ---------------------------------------------------------------------- RLE

std::vector<uint8_t> EncodeMaskRle(const Mask& mask) {
  std::vector<uint8_t> out;
  const auto& l = mask.labels;
  for (size_t i = 0; i < l.size();) {
    size_t j = i;
    while (j < l.size() && l[j] == l[i]) ++j;
    out.push_back(l[i]);
    uint64_t run = j - i;
    do {
      uint8_t b = run & 0x7F;
      run >>= 7;
      out.push_back(run ? (b | 0x80) : b);
    } while (run);
    i = j;
  }
  return out;
}

Mask DecodeMaskRle(std::span<const uint8_t> bytes, int64_t height, int64_t width) {
  if (height < 0 || width < 0) throw DecodeError("negative mask size");
  Mask m(height, width);
  const size_t total = m.labels.size();
  size_t pos = 0, filled = 0;
  while (filled < total) {
    if (pos >= bytes.size()) throw DecodeError("run-length mask truncated");
    const uint8_t label = bytes[pos++];
    uint64_t run = 0;
    for (int shift = 0;; shift += 7) {
      if (pos >= bytes.size()) throw DecodeError("run-length mask truncated");
      if (shift > 56) throw DecodeError("run length overflows");
      const uint8_t b = bytes[pos++];
      run |= uint64_t(b & 0x7F) << shift;
      if (!(b & 0x80)) break;
    }
    if (run == 0) throw DecodeError("zero-length run");
    if (run > total - filled) throw DecodeError("run-length mask overruns " + std::to_string(total) + " pixels");
    std::fill_n(m.labels.begin() + static_cast<std::ptrdiff_t>(filled), run, label);
    filled += run;
  }
  if (pos != bytes.size()) throw DecodeError("trailing bytes after run-length mask");
  return m;
}

std::vector<uint8_t> SerializeResponse(const Response& r) {
  ByteWriter w(Endian::kBig);
  w.U8(static_cast<uint8_t>(r.status));
  if (r.status == ResponseStatus::kOk) {
    w.U32(static_cast<uint32_t>(r.mask.height));
    w.U32(static_cast<uint32_t>(r.mask.width));
    w.Raw(EncodeMaskRle(r.mask));
  } else {
    w.U32(0);
    w.U32(0);
    w.Raw(std::string_view(r.message));
  }
  return w.Take();
}

Response ParseResponse(std::span<const uint8_t> bytes) {
  ByteReader rd(bytes, Endian::kBig, ErrorKind::kProtocol);
  Response r;
  const uint8_t status = rd.U8();
  if (status > 3) throw ProtocolError("unknown response status " + std::to_string(status));
  r.status = static_cast<ResponseStatus>(status);
  const uint32_t h = rd.U32(), w = rd.U32();
  const auto body = rd.Raw(rd.remaining());
  if (r.status == ResponseStatus::kOk) {
    r.mask = DecodeMaskRle(body, h, w);
  } else {
    r.message.assign(body.begin(), body.end());
  }
  return r;
}

// ------------------------------------------------------------------- server

void ModelRegistry::Add(std::shared_ptr<Model> model) {
  if (!model || !model->tables_ready()) throw ConfigError("registry: model has no entropy tables");
  model->set_training(false);
  const auto id = static_cast<uint16_t>(model->config().model_id);
  if (!models_.emplace(id, std::move(model)).second) {
    throw ConfigError("registry: duplicate model_id " + std::to_string(id));
  }
}

std::shared_ptr<Model> ModelRegistry::Find(uint16_t id) const {
  auto it = models_.find(id);
  return it == models_.end() ? nullptr : it->second;
}

std::vector<uint8_t> HandleRequest(const ModelRegistry& registry, std::span<const uint8_t> request) {
  Response resp;
  try {
    const Container c = ParseContainer(request);
    auto model = registry.Find(c.model_id);
    if (!model) {
      resp = ErrorResponse(ResponseStatus::kUnknownModel, "unknown model_id " + std::to_string(c.model_id));
    } else {
      resp.mask = CloudDecode(*model, c);
    }
  } catch (const TransportError& e) {
    resp = ErrorResponse(ResponseStatus::kMalformed, e.what());
  } catch (const ProtocolError& e) {
    resp = ErrorResponse(ResponseStatus::kMalformed, e.what());
  } catch (const DecodeError& e) {
    resp = ErrorResponse(ResponseStatus::kMalformed, e.what());
  } catch (const std::exception& e) {
    resp = ErrorResponse(ResponseStatus::kInternal, e.what());
  }
  return SerializeResponse(resp);
}

std::string ResolveListenAddress(const std::string& configured) {
  const char* env = std::getenv("JSD_LISTEN");
  return (env && *env) ? std::string(env) : configured;
}

Server::Server(std::shared_ptr<const ModelRegistry> registry, ServeConfig config)
    : registry_(std::move(registry)), config_(std::move(config)) {
  if (!registry_ || registry_->size() == 0) throw ConfigError("server needs at least one model");
  if (config_.workers < 1) throw ConfigError("serve.workers must be >= 1");
}

Server::~Server() { Stop(); }

void Server::Start() {
  addrinfo* res = Resolve(config_.listen, true);
  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (listen_fd_ < 0) {
    freeaddrinfo(res);
    throw TransportError(std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 64) != 0) {
    const std::string err = std::strerror(errno);
    freeaddrinfo(res);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError("cannot listen on " + config_.listen + ": " + err);
  }
  freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  stopping_ = false;
  acceptor_ = std::thread([this] { AcceptLoop(); });
}

void Server::Stop() {
  if (listen_fd_ < 0 && !acceptor_.joinable()) return;
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void Server::AcceptLoop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    if (active_.load() >= config_.workers) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      continue;
    }
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    SetTimeout(fd, config_.idle_timeout_ms);
    ++active_;
    std::lock_guard<std::mutex> lock(mu_);
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { Serve(fd); });
  }
}

void Server::Serve(int fd) {
  std::vector<uint8_t> request;
  try {
    while (!stopping_ && ReadFrame(fd, &request)) {
      const auto response = HandleRequest(*registry_, request);
      WriteFrame(fd, response);
      ++served_;
    }
  } catch (const ProtocolError& e) {
    // Oversized length prefix: the stream cannot be resynchronized.
    try {
      WriteFrame(fd, SerializeResponse(ErrorResponse(ResponseStatus::kMalformed, e.what())));
    } catch (const Error&) {
    }
  } catch (const Error&) {
    // Idle timeout or peer gone: close quietly.
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    std::erase(client_fds_, fd);
  }
  ::close(fd);
  --active_;
}

// ------------------------------------------------------------------- client

Client::Client(const std::string& address, int timeout_ms) {
  addrinfo* res = Resolve(address, false);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0 || ::connect(fd_, res->ai_addr, res->ai_addrlen) != 0) {
    const std::string err = std::strerror(errno);
    freeaddrinfo(res);
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    throw TransportError("cannot connect to " + address + ": " + err);
  }
  freeaddrinfo(res);
  const int one = 1;
  setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  SetTimeout(fd_, timeout_ms);
}

Client::~Client() {
  if (fd_ >= 0) ::close(fd_);
}

std::vector<uint8_t> Client::Exchange(std::span<const uint8_t> payload) {
  WriteFrame(fd_, payload);
  std::vector<uint8_t> response;
  if (!ReadFrame(fd_, &response)) throw TransportError("server closed the connection");
  return response;
}

Response Client::Segment(const Container& container) {
  const auto bytes = SerializeContainer(container);
  return ParseResponse(Exchange(bytes));
}

}  // namespace jsd
