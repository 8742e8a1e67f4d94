/*
 * Copyright 2026 The Empathy-LSTM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "empathy/data.hpp"

namespace empathy::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kData = 3,
  kNumerical = 4,
};

/// Default output root when --out is not given.
inline constexpr const char* kOutRootVariable = "EMPATHY_OUT_ROOT";

/// Runs one command line (without the program name) and returns its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Sessions of a corpus directory: the files listed in manifest.json, or
/// every session file under sessions/ when there is no manifest.
std::vector<Session> load_corpus(const std::filesystem::path& dir);

}  // namespace empathy::cli
