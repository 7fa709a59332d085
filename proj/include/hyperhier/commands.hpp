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

// Subcommands behind the `hyperhier` executable. Each returns an exit
// status: 0 success, 1 numeric failure, 2 usage or parse failure.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hyperhier {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumeric = 1;
inline constexpr int kExitUsage = 2;

struct GradcheckArgs {
  std::string config;  // empty: defaults
  std::optional<std::uint64_t> seed;
  std::string out;     // optional report directory
};

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
};

struct EvalArgs {
  std::string checkpoint;
  std::optional<std::uint64_t> seed;  // data seed; defaults to the training seed
  std::string hierarchy;              // optional override
  std::string out = "eval";
};

struct MineArgs {
  std::string checkpoint;
  std::string candidates;
  std::string config;  // optional; its mining section overrides the checkpoint's
  std::string out = "mine";
};

struct PqArgs {
  std::string pred;
  std::string gt;
  std::string closed;  // optional closed-world prediction for delta PQ
  int unknown_class = -1;
  std::string out = "pq";
};

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& log, std::ostream& err);
int cmd_train(const TrainArgs& args, std::ostream& log, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& log, std::ostream& err);
int cmd_mine(const MineArgs& args, std::ostream& log, std::ostream& err);
int cmd_pq(const PqArgs& args, std::ostream& log, std::ostream& err);

// Parses argv and dispatches.
int run_cli(const std::vector<std::string>& argv, std::ostream& log, std::ostream& err);

}  // namespace hyperhier
