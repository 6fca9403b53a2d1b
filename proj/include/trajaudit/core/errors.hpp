// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace trajaudit {

// Base of every domain error raised by the library. The CLI maps these to
// exit code 1; anything else (bad flags, unreadable config) is a usage error.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

#define TRAJAUDIT_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                          \
  public:                                                              \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  };

// traj-core
TRAJAUDIT_DEFINE_ERROR(SchemaError)
TRAJAUDIT_DEFINE_ERROR(InvariantError)
TRAJAUDIT_DEFINE_ERROR(MappingError)
TRAJAUDIT_DEFINE_ERROR(DatasetError)

// synthpipe
TRAJAUDIT_DEFINE_ERROR(TooShort)
TRAJAUDIT_DEFINE_ERROR(IndexError)
TRAJAUDIT_DEFINE_ERROR(PayloadMismatch)
TRAJAUDIT_DEFINE_ERROR(PairingError)

// metrics
TRAJAUDIT_DEFINE_ERROR(LengthMismatch)

// verifier
TRAJAUDIT_DEFINE_ERROR(TemplateError)

// monitor
TRAJAUDIT_DEFINE_ERROR(MissingCheckpoint)

// scriptenv
TRAJAUDIT_DEFINE_ERROR(EnvError)
TRAJAUDIT_DEFINE_ERROR(UnknownTask)
TRAJAUDIT_DEFINE_ERROR(CorruptBlob)

// review-service
TRAJAUDIT_DEFINE_ERROR(InsufficientSamples)
TRAJAUDIT_DEFINE_ERROR(UnknownSample)
TRAJAUDIT_DEFINE_ERROR(UnknownReviewSet)
TRAJAUDIT_DEFINE_ERROR(DuplicateVerdict)
TRAJAUDIT_DEFINE_ERROR(EmptySet)

#undef TRAJAUDIT_DEFINE_ERROR

} // namespace trajaudit
