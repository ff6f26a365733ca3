// Copyright 2026 The srpo Authors. All Rights Reserved.
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

#ifndef SRPO_ERROR_HPP_
#define SRPO_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace srpo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised only for internal misuse of the parser (e.g. an out-of-range mode).
class FormatError : public Error {
 public:
  using Error::Error;
};

class MissingSlot : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class GroupTooSmall : public Error {
 public:
  using Error::Error;
};

class UnknownContext : public Error {
 public:
  using Error::Error;
};

class UnknownChoice : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class InsufficientDiversity : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable input files (tasks, datasets, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace srpo

#endif  // SRPO_ERROR_HPP_
