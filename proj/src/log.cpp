// Copyright 2026 The jepamon Authors
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

#include "jepamon/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace jepamon {

namespace {

std::mutex sink_mutex;

WarningSink& sink() {
  static WarningSink s = [](std::string_view m) { std::cerr << "warning: " << m << '\n'; };
  return s;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex);
  if (sink()) sink()(message);
}

WarningSink set_warning_sink(WarningSink s) {
  std::lock_guard lock(sink_mutex);
  return std::exchange(sink(), std::move(s));
}

}  // namespace jepamon
