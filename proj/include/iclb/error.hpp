// Copyright 2026 The iclb Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iclb {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A type invariant was violated at construction time.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---- corpus ----

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, const std::string& detail)
      : Error("malformed record at line " + std::to_string(line) + ": " + detail),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnknownLabel : public Error {
 public:
  UnknownLabel(std::size_t line, std::string value)
      : Error("unknown label '" + value + "' at line " + std::to_string(line)),
        line_(line),
        value_(std::move(value)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& value() const noexcept { return value_; }

 private:
  std::size_t line_;
  std::string value_;
};

class EmptyFile : public Error {
 public:
  EmptyFile() : Error("dataset file contains no records") {}
};

class InsufficientExamples : public Error {
 public:
  explicit InsufficientExamples(std::string label, const std::string& detail = {})
      : Error("insufficient examples for '" + label + "'" +
              (detail.empty() ? "" : ": " + detail)),
        label_(std::move(label)) {}
  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

// ---- context ----

class EmptyQuery : public PreconditionError {
 public:
  EmptyQuery() : PreconditionError("query text is empty") {}
};

// ---- attack ----

class EmptyText : public PreconditionError {
 public:
  EmptyText() : PreconditionError("text is empty") {}
};

class InsufficientTargetExemplars : public Error {
 public:
  InsufficientTargetExemplars(std::size_t have, std::size_t need)
      : Error("insufficient target-label exemplars: have " + std::to_string(have) +
              ", need " + std::to_string(need)),
        have_(have),
        need_(need) {}
  std::size_t have() const noexcept { return have_; }
  std::size_t need() const noexcept { return need_; }

 private:
  std::size_t have_;
  std::size_t need_;
};

// Raised when a trigger would be embedded into an exemplar a second time.
class AlreadyPoisoned : public Error {
 public:
  explicit AlreadyPoisoned(std::size_t index)
      : Error("exemplar " + std::to_string(index) + " already carries a trigger"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// ---- backend ----

// Base for failures talking to a model or translation service.
class BackendError : public Error {
 public:
  using Error::Error;
};

class BackendUnavailable : public BackendError {
 public:
  explicit BackendUnavailable(const std::string& detail)
      : BackendError("backend unavailable: " + detail) {}
};

class ProtocolViolation : public BackendError {
 public:
  explicit ProtocolViolation(const std::string& detail)
      : BackendError("protocol violation: " + detail) {}
};

class Timeout : public BackendError {
 public:
  explicit Timeout(const std::string& detail) : BackendError("timeout: " + detail) {}
};

class CapabilityMissing : public BackendError {
 public:
  explicit CapabilityMissing(const std::string& capability)
      : BackendError("backend lacks capability: " + capability) {}
};

// ---- defense ----

class TranslationUnavailable : public BackendError {
 public:
  explicit TranslationUnavailable(const std::string& detail)
      : BackendError("translation unavailable: " + detail) {}
};

class InsufficientPool : public Error {
 public:
  InsufficientPool(std::size_t have, std::size_t need)
      : Error("defensive pool too small: have " + std::to_string(have) + ", need " +
              std::to_string(need)) {}
};

class EmptyInstruction : public PreconditionError {
 public:
  EmptyInstruction() : PreconditionError("instruction text is empty") {}
};

// ---- evaluator ----

class LengthMismatch : public PreconditionError {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : PreconditionError("length mismatch: " + std::to_string(a) + " vs " +
                          std::to_string(b)) {}
};

class EmptyInput : public PreconditionError {
 public:
  EmptyInput() : PreconditionError("empty prediction list") {}
};

class NoNonTargetSamples : public PreconditionError {
 public:
  NoNonTargetSamples() : PreconditionError("no non-target samples to attack") {}
};

}  // namespace iclb
