// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace svo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  /// Short machine-parsable category, e.g. "config" or "structural".
  virtual const char* category() const noexcept { return "error"; }
};

#define SVO_DEFINE_ERROR(Name, Tag)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    using Error::Error;                                              \
    const char* category() const noexcept override { return Tag; }   \
  }

/// A value outside the mathematical domain of an operation.
SVO_DEFINE_ERROR(InputDomainError, "input-domain");
/// Shape or arity mismatch between tensors, layers or aligned sequences.
SVO_DEFINE_ERROR(StructuralError, "structural");
SVO_DEFINE_ERROR(ConfigError, "config");
SVO_DEFINE_ERROR(SpawnError, "spawn");
SVO_DEFINE_ERROR(TrainingError, "training");
SVO_DEFINE_ERROR(IoError, "io");
SVO_DEFINE_ERROR(FormatError, "format");

#undef SVO_DEFINE_ERROR

}  // namespace svo
