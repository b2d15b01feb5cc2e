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

#include "lvlab/common.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lvlab {

namespace {

std::atomic<int> g_thread_override{0};

int env_thread_cap() {
  const char* raw = std::getenv("LVLAB_THREADS");
  if (raw == nullptr) return 0;
  char* end = nullptr;
  long v = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || v <= 0) return 0;
  return static_cast<int>(v);
}

std::mutex g_warn_mutex;
WarningHandler g_warn_handler;

}  // namespace

int thread_count() {
  if (int o = g_thread_override.load(); o > 0) return o;
#ifdef _OPENMP
  int n = omp_get_max_threads();
#else
  int n = 1;
#endif
  if (int cap = env_thread_cap(); cap > 0 && cap < n) n = cap;
  return n < 1 ? 1 : n;
}

void set_thread_count(int n) { g_thread_override.store(n > 0 ? n : 0); }

void set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(g_warn_mutex);
  g_warn_handler = std::move(handler);
}

void warn(const std::string& message) {
  std::lock_guard lock(g_warn_mutex);
  if (g_warn_handler) {
    g_warn_handler(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

}  // namespace lvlab
