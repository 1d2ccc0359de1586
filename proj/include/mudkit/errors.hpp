/*
   Copyright 2026 The mudkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace mudkit {

/// Argument outside the mathematical domain of a function.
class domain_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An iterative method (series, continued fraction, quadrature) hit its cap.
class convergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A user-supplied parameter failed validation. `field()` names the
/// offending parameter so front ends can report it.
class validation_error : public std::invalid_argument {
public:
    validation_error(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field))
    {
    }

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace mudkit
