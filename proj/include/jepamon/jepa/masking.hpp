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

#include <vector>

#include "jepamon/object_model.hpp"
#include "jepamon/rng.hpp"

namespace jepamon::jepa {

struct MaskingConfig {
  int n_masked = 4;

  /// 1 <= n_masked < minimum track length. Zero is allowed only when
  /// `allow_zero` is set (test configurations).
  void validate(bool allow_zero = false) const;
};

struct MaskedSample {
  FeatureMatrix masked;    // T x 5: masked rows zeroed, mask bit = 1 on masked rows
  std::vector<int> indices;  // ascending, distinct
  FeatureMatrix unmasked;  // T x 5: input features, mask bit all zero
};

/// Appends an all-zero mask-bit column.
FeatureMatrix with_mask_bit(const FeatureMatrix& features);

/// Samples `n_masked` distinct timesteps uniformly without replacement and
/// zeroes their feature columns. Throws if n_masked >= T.
MaskedSample mask(const FeatureMatrix& features, int n_masked, Rng& rng);

}  // namespace jepamon::jepa
