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

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "common.h"
#include "json.hpp"
#include "jsdseg/errors.h"

namespace {

int ExitCode(jsd::ErrorKind kind) {
  using K = jsd::ErrorKind;
  switch (kind) {
    case K::kConfig:
    case K::kUsage:
      return 2;
    case K::kData:
    case K::kDecode:
    case K::kDimension:
    case K::kValidation:
      return 3;
    case K::kProtocol:
    case K::kTransport:
      return 4;
    case K::kNumeric:
      return 5;
    default:
      return 1;
  }
}

// One JSON object per failure on stderr, easy to grep from scripts.
int Fail(const std::string& kind, int code, const std::string& message) {
  nlohmann::json j{{"error", kind}, {"exit", code}, {"message", message}};
  std::cerr << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jsdseg: learned split-computing image segmentation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "jsdseg 0.1.0");
  jsd::cli::AddGenData(app);
  jsd::cli::AddTrain(app);
  jsd::cli::AddSweep(app);
  jsd::cli::AddEncode(app);
  jsd::cli::AddSegment(app);
  jsd::cli::AddServe(app);
  jsd::cli::AddFuse(app);
  jsd::cli::AddBench(app);
  jsd::cli::AddPlot(app);
  jsd::cli::AddConfig(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail("usage", 2, e.what());
  } catch (const jsd::Error& e) {
    return Fail(std::string(jsd::ErrorKindName(e.kind())), ExitCode(e.kind()), e.what());
  } catch (const std::exception& e) {
    return Fail("internal", 1, e.what());
  }
  return 0;
}
