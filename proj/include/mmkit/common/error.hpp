// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmkit {

enum class ErrorKind {
    Decode,
    EmptyDocument,
    SplitImpossible,
    Schema,
    DuplicateId,
    InvalidArgument,
    Leakage,
    Budget,
    Integrity,
    Transport,
    Auth,
    Session,
    Validation,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Domain error carrying a machine-readable kind. The CLI maps every
/// Error to exit code 1.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept { return kind_ == ErrorKind::Transport; }

  private:
    ErrorKind kind_;
};

} // namespace mmkit
