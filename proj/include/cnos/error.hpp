// Copyright 2026 The cnos-match Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace cnos {

// Base of every error raised by the library. `kind()` is a stable short tag
// used by the command-line front end when reporting diagnostics.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

#define CNOS_DEFINE_ERROR(Name, tag)                              \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(what) {}       \
    const char* kind() const noexcept override { return tag; }    \
  };

CNOS_DEFINE_ERROR(InvalidArgument, "invalid-argument")
CNOS_DEFINE_ERROR(DegenerateDescriptor, "degenerate-descriptor")
CNOS_DEFINE_ERROR(IoError, "io")
CNOS_DEFINE_ERROR(FormatError, "format")
CNOS_DEFINE_ERROR(CorruptFile, "corrupt-file")
CNOS_DEFINE_ERROR(EmptyMask, "empty-mask")
CNOS_DEFINE_ERROR(CorruptRle, "corrupt-rle")
CNOS_DEFINE_ERROR(ValidationError, "validation")
CNOS_DEFINE_ERROR(ConfigError, "config")

#undef CNOS_DEFINE_ERROR

}  // namespace cnos
