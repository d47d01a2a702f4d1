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

#ifndef JSDSEG_ERRORS_H_
#define JSDSEG_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace jsd {

// Error categories. The numeric values of the CLI-facing kinds double as
// process exit codes (see tools/).
enum class ErrorKind {
  kDimension,
  kConfig,
  kState,
  kUsage,
  kCoding,
  kDecode,
  kNumeric,
  kValidation,
  kTransport,
  kProtocol,
  kData,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define JSDSEG_DEFINE_ERROR(Name, Kind)                   \
  class Name : public Error {                             \
   public:                                                \
    explicit Name(const std::string& message)             \
        : Error(ErrorKind::Kind, message) {}              \
  }

JSDSEG_DEFINE_ERROR(DimensionError, kDimension);
JSDSEG_DEFINE_ERROR(ConfigError, kConfig);
JSDSEG_DEFINE_ERROR(StateError, kState);
JSDSEG_DEFINE_ERROR(UsageError, kUsage);
JSDSEG_DEFINE_ERROR(CodingError, kCoding);
JSDSEG_DEFINE_ERROR(DecodeError, kDecode);
JSDSEG_DEFINE_ERROR(NumericError, kNumeric);
JSDSEG_DEFINE_ERROR(ValidationError, kValidation);
JSDSEG_DEFINE_ERROR(TransportError, kTransport);
JSDSEG_DEFINE_ERROR(ProtocolError, kProtocol);
JSDSEG_DEFINE_ERROR(DataError, kData);

#undef JSDSEG_DEFINE_ERROR

}  // namespace jsd

#endif  // JSDSEG_ERRORS_H_
