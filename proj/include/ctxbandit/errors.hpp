// Copyright 2026 The ctxbandit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace ctxbandit {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument, configuration or input file.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// No closed-form expectation exists for the (feature map or kernel, distribution)
// pair. Callers fall back to sample-based features.
class UnsupportedExpectation : public Error {
 public:
  using Error::Error;
};

// Factorization failure, PSD violation, non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// select/observe called out of order.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxbandit
