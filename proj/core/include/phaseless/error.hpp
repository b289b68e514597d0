// SPDX-License-Identifier: Apache-2.0
//
// phaseless: active array imaging from intensity-only measurements
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phaseless {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain (e.g. coincident points
/// passed to the Green's function).
class DomainError : public Error {
public:
    using Error::Error;
};

/// An operation was called on inputs that violate its stated precondition
/// (shape mismatch, non-flat grid for a paraxial model, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Invalid experiment configuration; detected before any computation.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A phase-recovery chain hit a reference magnitude below the floor.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, std::ptrdiff_t index)
        : Error(what), index_(index) {}

    /// Offending index (receiver or skew-diagonal), -1 when not applicable.
    std::ptrdiff_t index() const noexcept { return index_; }

private:
    std::ptrdiff_t index_;
};

/// File system or data-file failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed data file. `line()` is 1-based; 0 means the whole file.
class ParseError : public IoError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : IoError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Plan file and intensity data disagree, or a query is not in the plan.
class ConsistencyError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace phaseless
