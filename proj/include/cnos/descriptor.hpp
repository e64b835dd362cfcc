// Copyright 2026 The cnos-match Authors
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

// Descriptor tensors: the per-template reference set and the per-image
// proposal descriptors, plus the normalization and similarity primitives
// every matching step is built from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "cnos/error.hpp"

namespace cnos {

// Dot product accumulated in double with four independent partial sums.
// The partial-sum layout depends only on the length, so dot(a, b) and
// dot(b, a) are bitwise identical.
inline double dot(std::span<const float> a, std::span<const float> b) {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * b[i];
    s1 += static_cast<double>(a[i + 1]) * b[i + 1];
    s2 += static_cast<double>(a[i + 2]) * b[i + 2];
    s3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline std::vector<float> l2_normalize(std::span<const float> v) {
  if (v.empty()) throw InvalidArgument("cannot normalize an empty vector");
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double n = std::sqrt(sq);
  if (!(n >= 1e-12) || !std::isfinite(n))
    throw DegenerateDescriptor("descriptor norm " + std::to_string(n) +
                               " is too small to normalize");
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<float>(v[i] / n);
  return out;
}

// Cosine similarity of two already-normalized descriptors, clamped to [-1, 1].
inline double cosine_similarity(std::span<const float> a,
                                std::span<const float> b) {
  if (a.size() != b.size())
    throw InvalidArgument("descriptor dimension mismatch: " +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  return std::clamp(dot(a, b), -1.0, 1.0);
}

// Normalizes each `dim`-long row of `data` in place. Returns how many rows
// moved by more than `tolerance` in any component.
inline std::size_t normalize_rows(std::vector<float>& data, std::size_t dim,
                                  double tolerance = 1e-3) {
  if (dim == 0) return 0;
  std::size_t changed = 0;
  for (std::size_t off = 0; off + dim <= data.size(); off += dim) {
    std::span<float> row(data.data() + off, dim);
    const std::vector<float> unit = l2_normalize(row);
    bool moved = false;
    for (std::size_t i = 0; i < dim; ++i) {
      if (std::abs(static_cast<double>(unit[i]) - row[i]) > tolerance)
        moved = true;
      row[i] = unit[i];
    }
    changed += moved ? 1 : 0;
  }
  return changed;
}

// N_O x N_V x D template descriptors, last dimension contiguous.
struct ReferenceSet {
  std::vector<std::string> object_labels;
  std::size_t n_views = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::size_t n_objects() const { return object_labels.size(); }

  std::span<const float> row(std::size_t object, std::size_t view) const {
    return {values.data() + (object * n_views + view) * dim, dim};
  }
  std::span<const float> object_block(std::size_t object) const {
    return {values.data() + object * n_views * dim, n_views * dim};
  }

  void validate() const {
    if (object_labels.empty())
      throw InvalidArgument("reference set must hold at least one object");
    if (n_views == 0 || dim == 0)
      throw InvalidArgument("reference set needs n_views >= 1 and dim >= 1");
    if (values.size() != n_objects() * n_views * dim)
      throw InvalidArgument("reference payload size does not match shape");
    std::unordered_set<std::string> seen;
    for (const auto& l : object_labels)
      if (!seen.insert(l).second)
        throw InvalidArgument("duplicate object label '" + l + "'");
  }
};

// N_P x D proposal descriptors. N_P may be zero.
struct ProposalDescriptors {
  std::size_t dim = 0;
  std::vector<float> values;

  std::size_t size() const { return dim ? values.size() / dim : 0; }
  bool empty() const { return size() == 0; }

  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
};

}  // namespace cnos
