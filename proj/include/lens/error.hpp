// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef LENS_ERROR_HPP
#define LENS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lens {

/// All recoverable failures (shape mismatches, malformed files, bad
/// parameters) are reported through this type. The message is a single
/// line suitable for the CLI's `error:` prefix.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

}  // namespace lens

#endif  // LENS_ERROR_HPP
