// Copyright 2026 The hyperhier Authors.
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

#include <stdexcept>
#include <string>
#include <vector>

namespace hyperhier {

// Caller violated a precondition (bad argument, dimension mismatch, unknown
// class, malformed input file).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced or would produce a non-finite or degenerate value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hierarchy validation failure. Carries the offending node ids (dense ids
// in file order; empty when the problem is not tied to specific nodes).
class ValidationError : public UsageError {
 public:
  ValidationError(const std::string& what, std::vector<int> node_ids)
      : UsageError(what), node_ids_(std::move(node_ids)) {}

  const std::vector<int>& node_ids() const { return node_ids_; }

 private:
  std::vector<int> node_ids_;
};

}  // namespace hyperhier
