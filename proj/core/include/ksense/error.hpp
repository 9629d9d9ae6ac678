// Copyright 2026 The K-SENSE Authors
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

#ifndef KSENSE_ERROR_HPP_
#define KSENSE_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ksense {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition or invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operand shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure (open, short write, ...).
class IoError : public Error {
 public:
  using Error::Error;
};

// A SupCon batch in which no anchor has a positive pair. Raised instead of
// silently dropping the contrastive term; it normally means the batch sampler
// is broken.
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, int step)
      : Error(what), epoch_(epoch), step_(step) {}
  int epoch() const { return epoch_; }
  int step() const { return step_; }

 private:
  int epoch_;
  int step_;
};

enum class FormatErrorKind {
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kNonFinite,
  kInvalidRecord,
  kCountMismatch,
};

const char* to_string(FormatErrorKind kind);

// Malformed KSEB / KSEP container. Carries the byte offset at which the
// problem was detected.
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, std::uint64_t offset,
              const std::string& detail);
  FormatErrorKind kind() const { return kind_; }
  std::uint64_t offset() const { return offset_; }

 private:
  FormatErrorKind kind_;
  std::uint64_t offset_;
};

}  // namespace ksense

#endif  // KSENSE_ERROR_HPP_
