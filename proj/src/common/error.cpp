// SPDX-License-Identifier: Apache-2.0
#include "mmkit/common/error.hpp"

namespace mmkit {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Decode: return "decode";
    case ErrorKind::EmptyDocument: return "empty_document";
    case ErrorKind::SplitImpossible: return "split_impossible";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::DuplicateId: return "duplicate_id";
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Leakage: return "leakage";
    case ErrorKind::Budget: return "budget";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Auth: return "auth";
    case ErrorKind::Session: return "session";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

} // namespace mmkit
