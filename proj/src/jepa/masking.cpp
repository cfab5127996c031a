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

#include "jepamon/jepa/masking.hpp"

#include <algorithm>
#include <numeric>

#include "jepamon/errors.hpp"

namespace jepamon::jepa {

void MaskingConfig::validate(bool allow_zero) const {
  if (n_masked < (allow_zero ? 0 : 1) || n_masked >= kMinTrackLength) {
    throw ConfigError("masking: n_masked must satisfy 1 <= n_masked < " +
                      std::to_string(kMinTrackLength));
  }
}

FeatureMatrix with_mask_bit(const FeatureMatrix& features) {
  if (features.cols() != kNumFeatures) {
    throw Error("mask: expected a T x 4 feature matrix, got " + std::to_string(features.cols()) +
                " columns");
  }
  FeatureMatrix out = FeatureMatrix::Zero(features.rows(), kNumFeatures + 1);
  out.leftCols(kNumFeatures) = features;
  return out;
}

MaskedSample mask(const FeatureMatrix& features, int n_masked, Rng& rng) {
  const int length = static_cast<int>(features.rows());
  if (n_masked < 0 || n_masked >= length) {
    throw Error("mask: cannot mask " + std::to_string(n_masked) + " of " + std::to_string(length) +
                " timesteps");
  }
  MaskedSample s;
  s.unmasked = with_mask_bit(features);
  s.masked = s.unmasked;
  // Partial Fisher-Yates: the first n_masked slots form a uniform sample.
  std::vector<int> pool(length);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < n_masked; ++i) {
    const int j = std::uniform_int_distribution<int>(i, length - 1)(rng);
    std::swap(pool[i], pool[j]);
  }
  s.indices.assign(pool.begin(), pool.begin() + n_masked);
  std::sort(s.indices.begin(), s.indices.end());
  for (int t : s.indices) {
    s.masked.row(t).head(kNumFeatures).setZero();
    s.masked(t, kNumFeatures) = 1.0;
  }
  return s;
}

}  // namespace jepamon::jepa
