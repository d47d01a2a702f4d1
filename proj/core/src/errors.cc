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

#include "jsdseg/errors.h"

namespace jsd {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kState: return "state";
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kCoding: return "coding";
    case ErrorKind::kDecode: return "decode";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kProtocol: return "protocol";
    case ErrorKind::kData: return "data";
  }
  return "unknown";
}

}  // namespace jsd
