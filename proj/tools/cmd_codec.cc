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

// encode, segment, serve.

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <cstring>
#include <memory>

#include "common.h"
#include "jsdseg/errors.h"
#include "jsdseg/image.h"
#include "jsdseg/wire.h"

namespace jsd::cli {

namespace {

bool LooksLikeContainer(const std::vector<uint8_t>& bytes) {
  return bytes.size() >= 4 && std::memcmp(bytes.data(), "JSDC", 4) == 0;
}

std::shared_ptr<ModelRegistry> LoadRegistry(const std::vector<std::string>& paths) {
  auto reg = std::make_shared<ModelRegistry>();
  for (const auto& p : paths) reg->Add(std::make_shared<Model>(LoadModel(p)));
  return reg;
}

}  // namespace

void AddEncode(CLI::App& app) {
  struct Opts {
    std::string input, model, out;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("encode", "edge side: image to .jsdc container");
  cmd->add_option("image", o->input, "PPM or PNG image")->required();
  cmd->add_option("--model,-m", o->model, "checkpoint")->required();
  cmd->add_option("--out,-o", o->out, "container path")->required();
  cmd->callback([o] {
    Model model = LoadModel(o->model);
    const Container c = EdgeEncode(model, ReadImage(o->input));
    WriteFileBytes(o->out, SerializeContainer(c));
    std::printf("%s: %lldx%lld, %zu payload bytes, %.5f bpp\n", o->out.c_str(), (long long)c.width,
                (long long)c.height, c.payload_bytes(), c.bpp());
  });
}

void AddSegment(CLI::App& app) {
  struct Opts {
    std::string input, out, server;
    std::vector<std::string> models;
    int timeout_ms = 30000;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand(
      "segment", "decode a .jsdc container, or run the whole pipeline on an image, to a mask PNG");
  cmd->add_option("input", o->input, ".jsdc container or PPM/PNG image")->required();
  cmd->add_option("--model,-m", o->models, "checkpoint (repeatable; matched by model_id)");
  cmd->add_option("--out,-o", o->out, "mask PNG (palette)")->required();
  cmd->add_option("--server", o->server, "send the container to a running server (host:port)");
  cmd->add_option("--timeout-ms", o->timeout_ms, "server round-trip timeout")->capture_default_str();
  cmd->callback([o] {
    const auto bytes = ReadFileBytes(o->input);
    const bool is_container = LooksLikeContainer(bytes);
    if (o->models.empty() && (!is_container || o->server.empty())) {
      throw UsageError("segment needs --model (or a container plus --server)");
    }
    Mask mask;
    if (!o->server.empty()) {
      Container c;
      if (is_container) {
        c = ParseContainer(bytes);
      } else {
        Model edge = LoadModel(o->models.front());
        c = EdgeEncode(edge, ReadImage(o->input));
      }
      Client client(o->server, o->timeout_ms);
      Response r = client.Segment(c);
      if (r.status != ResponseStatus::kOk) {
        throw ProtocolError("server answered status " + std::to_string(int(r.status)) + ": " + r.message);
      }
      mask = std::move(r.mask);
    } else if (is_container) {
      const Container c = ParseContainer(bytes);
      auto reg = LoadRegistry(o->models);
      auto model = reg->Find(c.model_id);
      if (!model) throw ProtocolError("no loaded model has id " + std::to_string(c.model_id));
      mask = CloudDecode(*model, c);
    } else {
      Model model = LoadModel(o->models.front());
      const Container c = EdgeEncode(model, ReadImage(o->input));
      mask = CloudDecode(model, c);
    }
    WriteMaskPng(o->out, mask);
    std::printf("wrote %s (%lldx%lld)\n", o->out.c_str(), (long long)mask.width, (long long)mask.height);
  });
}

void AddServe(CLI::App& app) {
  struct Opts {
    ConfigOptions cfg;
    std::vector<std::string> models;
    std::string listen;
    int workers = -1, idle_timeout_ms = -1;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("serve", "run the cloud-side server until SIGINT or SIGTERM");
  AddConfigOptions(cmd, &o->cfg, false);
  cmd->add_option("--model,-m", o->models, "checkpoint (repeatable)")->required();
  cmd->add_option("--listen", o->listen, "host:port (default serve.listen; JSD_LISTEN overrides)");
  cmd->add_option("--workers", o->workers, "maximum concurrent connections");
  cmd->add_option("--idle-timeout-ms", o->idle_timeout_ms, "idle connection timeout");
  cmd->callback([o] {
    RunConfig c = ResolveConfig(o->cfg);
    if (!o->listen.empty()) c.serve.listen = o->listen;
    if (o->workers >= 0) c.serve.workers = o->workers;
    if (o->idle_timeout_ms >= 0) c.serve.idle_timeout_ms = o->idle_timeout_ms;
    c.serve.Validate();
    auto reg = LoadRegistry(o->models);

    // Block the stop signals before any thread starts so only sigwait sees them.
    sigset_t stop;
    sigemptyset(&stop);
    sigaddset(&stop, SIGINT);
    sigaddset(&stop, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop, nullptr);

    Server server(reg, c.serve);
    server.Start();
    const std::string addr = ResolveListenAddress(c.serve.listen);
    const std::string host = addr.substr(0, addr.rfind(':'));
    std::printf("listening on %s:%u with %zu model(s)\n", host.c_str(), unsigned(server.port()), reg->size());
    std::fflush(stdout);
    int sig = 0;
    sigwait(&stop, &sig);
    server.Stop();
    std::printf("stopped after %lld requests\n", (long long)server.served());
  });
}

}  // namespace jsd::cli
