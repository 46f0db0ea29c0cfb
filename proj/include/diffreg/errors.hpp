/******************************************************************************
 * Copyright 2026 The diffreg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * @file errors.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_ERRORS_HPP
#define DIFFREG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace diffreg {

/// Broken precondition: mismatched extents, bad shapes, invalid arguments.
struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite value produced by a forward or backward computation.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid registration/pyramid configuration.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// File could not be read, parsed or written.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Metric is not defined for the given input (e.g. empty region).
struct UndefinedMetric : std::domain_error {
    using std::domain_error::domain_error;
};

inline void require(bool condition, const std::string& what)
{
    if (!condition) {
        throw ContractViolation(what);
    }
}

}  // namespace diffreg

#endif  // DIFFREG_ERRORS_HPP
