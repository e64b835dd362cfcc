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

// Seeded synthetic descriptors standing in for a real embedding model.
// Each object gets a random unit prototype; templates and proposals are
// normalized prototypes plus isotropic Gaussian noise (per-component sigma).

#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cnos/descriptor.hpp"
#include "cnos/error.hpp"

namespace cnos {

struct SyntheticReference {
  ReferenceSet reference;
  std::vector<float> prototypes;  // N_O x D, unit rows

  std::span<const float> prototype(std::size_t object) const {
    return {prototypes.data() + object * reference.dim, reference.dim};
  }
};

inline std::string synthetic_object_label(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "obj_%06zu", index + 1);
  return buf;
}

namespace detail {

inline std::vector<float> perturbed_unit(std::span<const float> base,
                                         double sigma, std::mt19937_64& rng) {
  std::vector<float> v(base.begin(), base.end());
  if (sigma == 0.0) return v;  // base is already unit
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& x : v) x = static_cast<float>(x + sigma * gauss(rng));
  return l2_normalize(v);
}

}  // namespace detail

inline SyntheticReference synth_reference_set(std::size_t n_objects,
                                              std::size_t n_views,
                                              std::size_t dim,
                                              std::uint64_t seed,
                                              double view_noise) {
  if (n_objects < 1 || n_views < 1 || dim < 1)
    throw InvalidArgument("synthetic reference needs n_objects, n_views, dim >= 1");
  if (!(view_noise >= 0.0))
    throw InvalidArgument("view noise must be non-negative");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SyntheticReference out;
  out.prototypes.reserve(n_objects * dim);
  for (std::size_t o = 0; o < n_objects; ++o) {
    std::vector<float> g(dim);
    for (auto& x : g) x = static_cast<float>(gauss(rng));
    const std::vector<float> unit = l2_normalize(g);
    out.prototypes.insert(out.prototypes.end(), unit.begin(), unit.end());
  }

  ReferenceSet& ref = out.reference;
  ref.n_views = n_views;
  ref.dim = dim;
  ref.values.reserve(n_objects * n_views * dim);
  for (std::size_t o = 0; o < n_objects; ++o) {
    ref.object_labels.push_back(synthetic_object_label(o));
    for (std::size_t v = 0; v < n_views; ++v) {
      const auto row = detail::perturbed_unit(out.prototype(o), view_noise, rng);
      ref.values.insert(ref.values.end(), row.begin(), row.end());
    }
  }
  return out;
}

inline ProposalDescriptors synth_proposals(
    const SyntheticReference& ref, std::span<const std::size_t> assignments,
    double noise, std::uint64_t seed) {
  if (!(noise >= 0.0)) throw InvalidArgument("proposal noise must be non-negative");
  const std::size_t n_objects = ref.reference.n_objects();
  for (std::size_t a : assignments)
    if (a >= n_objects)
      throw InvalidArgument("assignment " + std::to_string(a) +
                            " out of range for " + std::to_string(n_objects) +
                            " objects");
  std::mt19937_64 rng(seed);
  ProposalDescriptors p;
  p.dim = ref.reference.dim;
  p.values.reserve(assignments.size() * p.dim);
  for (std::size_t a : assignments) {
    const auto row = detail::perturbed_unit(ref.prototype(a), noise, rng);
    p.values.insert(p.values.end(), row.begin(), row.end());
  }
  return p;
}

}  // namespace cnos
