// Copyright 2026 The lvlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// The `lvlab` command line: verification suites, Zipf utilities, sweeps and
// plots. Exit codes are 0 (all checks pass), 1 (a check failed) and 2 (usage
// or I/O error).

#ifndef LVLAB_TOOLS_CLI_HPP
#define LVLAB_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace lvlab::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitUsage = 2;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lvlab::cli

#endif  // LVLAB_TOOLS_CLI_HPP
