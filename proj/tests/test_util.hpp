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

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "jepamon/matrix.hpp"
#include "jepamon/nn/optim.hpp"
#include "jepamon/object_model.hpp"
#include "jepamon/rng.hpp"

namespace jepamon::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

inline std::vector<double*> pointers(Matrix& m) {
  std::vector<double*> p(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) p[static_cast<std::size_t>(i)] = m.data() + i;
  return p;
}

inline std::vector<double> flat(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

// Gradient checks in the tests use this relative tolerance and denominator floor.
inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradFloor = 1e-6;

inline nn::GradCheckReport grad_check(const std::function<double()>& loss,
                                      const std::vector<double*>& coords,
                                      const std::vector<double>& analytic) {
  return nn::finite_difference_check(loss, coords, analytic, 1e-5, kGradFloor);
}

/// A track with features drawn from N(0, 1) scaled to plausible ranges.
inline ObjectTrack random_track(int length, Rng& rng, const std::string& id = "o0") {
  std::normal_distribution<double> g(0.0, 1.0);
  ObjectTrack t;
  t.scene_id = "s";
  t.id = id;
  t.states.resize(static_cast<std::size_t>(length));
  for (auto& s : t.states) {
    s.x = 10.0 * g(rng);
    s.y = 10.0 * g(rng);
    s.v = std::abs(3.0 + 2.0 * g(rng));
    s.psi = wrap_angle(g(rng));
  }
  return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("jepamon-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace jepamon::testing
