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

// Matching stage: proposal-vs-template cosine similarities, reduction over
// the views of each object, and per-proposal object assignment.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cnos/descriptor.hpp"
#include "cnos/error.hpp"
#include "cnos/mask.hpp"
#include "cnos/parallel.hpp"

namespace cnos {

// N_P x N_O x N_V similarities, view axis contiguous.
struct SimilarityTensor {
  std::size_t n_proposals = 0;
  std::size_t n_objects = 0;
  std::size_t n_views = 0;
  std::vector<double> values;

  std::span<const double> views(std::size_t proposal, std::size_t object) const {
    return {values.data() + (proposal * n_objects + object) * n_views, n_views};
  }
  double at(std::size_t p, std::size_t o, std::size_t v) const {
    return values[(p * n_objects + o) * n_views + v];
  }
};

// N_P x N_O aggregated scores, row-major.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
};

enum class Aggregation { kMean, kMedian, kMax, kMeanTopK };

struct AggregationMethod {
  Aggregation kind = Aggregation::kMeanTopK;
  std::size_t k = 5;

  static AggregationMethod mean() { return {Aggregation::kMean, 1}; }
  static AggregationMethod median() { return {Aggregation::kMedian, 1}; }
  static AggregationMethod max() { return {Aggregation::kMax, 1}; }
  static AggregationMethod mean_top_k(std::size_t k = 5) {
    return {Aggregation::kMeanTopK, k};
  }
};

inline std::string to_string(const AggregationMethod& m) {
  switch (m.kind) {
    case Aggregation::kMean: return "mean";
    case Aggregation::kMedian: return "median";
    case Aggregation::kMax: return "max";
    case Aggregation::kMeanTopK: return "mean-topk";
  }
  return "unknown";
}

inline AggregationMethod parse_aggregation(const std::string& name,
                                           std::size_t k = 5) {
  if (name == "mean") return AggregationMethod::mean();
  if (name == "median") return AggregationMethod::median();
  if (name == "max") return AggregationMethod::max();
  if (name == "mean-topk" || name == "mean_topk") {
    if (k < 1) throw InvalidArgument("top-k aggregation needs k >= 1");
    return AggregationMethod::mean_top_k(k);
  }
  throw InvalidArgument("unknown aggregation '" + name + "'");
}

struct LabeledDetection {
  Rle mask;
  std::string object_label;
  std::size_t object_index = 0;
  double score = 0.0;
  std::size_t proposal_index = 0;
};

struct TemplateHit {
  std::size_t view = 0;
  double score = 0.0;

  friend bool operator==(const TemplateHit&, const TemplateHit&) = default;
};

// Reduces one (proposal, object) slice of view scores. Even-length medians
// average the two middle values; top-k with k > N_V averages all views.
template <typename T>
double aggregate(std::span<const T> scores, const AggregationMethod& method) {
  const std::size_t n = scores.size();
  if (n == 0) throw InvalidArgument("cannot aggregate zero views");
  switch (method.kind) {
    case Aggregation::kMax:
      return static_cast<double>(*std::max_element(scores.begin(), scores.end()));
    case Aggregation::kMean: {
      double s = 0.0;
      for (T x : scores) s += static_cast<double>(x);
      return s / static_cast<double>(n);
    }
    case Aggregation::kMedian: {
      std::vector<double> v(scores.begin(), scores.end());
      const std::size_t mid = n / 2;
      std::nth_element(v.begin(), v.begin() + mid, v.end());
      const double upper = v[mid];
      if (n % 2 == 1) return upper;
      const double lower = *std::max_element(v.begin(), v.begin() + mid);
      return (lower + upper) / 2.0;
    }
    case Aggregation::kMeanTopK: {
      if (method.k < 1) throw InvalidArgument("top-k aggregation needs k >= 1");
      const std::size_t k = std::min(method.k, n);
      std::vector<double> v(scores.begin(), scores.end());
      std::partial_sort(v.begin(), v.begin() + k, v.end(), std::greater<>());
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += v[i];
      return s / static_cast<double>(k);
    }
  }
  throw InvalidArgument("unknown aggregation kind");
}

inline void check_compatible(const ProposalDescriptors& p,
                             const ReferenceSet& r) {
  if (!p.empty() && p.dim != r.dim)
    throw InvalidArgument("proposal descriptor dim " + std::to_string(p.dim) +
                          " does not match reference dim " +
                          std::to_string(r.dim));
}

// Exhaustive cosine similarity of every proposal against every template.
inline SimilarityTensor similarity_tensor(const ProposalDescriptors& p,
                                          const ReferenceSet& r,
                                          std::size_t workers = 1) {
  check_compatible(p, r);
  SimilarityTensor t;
  t.n_proposals = p.size();
  t.n_objects = r.n_objects();
  t.n_views = r.n_views;
  t.values.resize(t.n_proposals * t.n_objects * t.n_views);
  const std::size_t templates = t.n_objects * t.n_views;
  parallel_for(t.n_proposals, workers, [&](std::size_t i) {
    const auto query = p.row(i);
    double* out = t.values.data() + i * templates;
    for (std::size_t j = 0; j < templates; ++j) {
      const std::span<const float> tmpl(r.values.data() + j * r.dim, r.dim);
      out[j] = std::clamp(dot(query, tmpl), -1.0, 1.0);
    }
  });
  return t;
}

inline ScoreMatrix aggregate_views(const SimilarityTensor& t,
                                   const AggregationMethod& method,
                                   std::size_t workers = 1) {
  if (t.n_views < 1) throw InvalidArgument("similarity tensor has no views");
  ScoreMatrix m{t.n_proposals, t.n_objects,
                std::vector<double>(t.n_proposals * t.n_objects)};
  parallel_for(t.n_proposals, workers, [&](std::size_t i) {
    for (std::size_t o = 0; o < t.n_objects; ++o)
      m.values[i * t.n_objects + o] = aggregate(t.views(i, o), method);
  });
  return m;
}

// One detection per proposal: argmax object (lowest index on ties) and its
// aggregated score. Scores are left raw in [-1, 1].
inline std::vector<LabeledDetection> assign_objects(
    const ScoreMatrix& agg, std::span<const std::string> labels,
    std::span<const Rle> masks) {
  if (agg.cols == 0 || labels.empty())
    throw InvalidArgument("cannot assign objects from an empty object set");
  if (labels.size() != agg.cols)
    throw InvalidArgument("label count does not match score columns");
  if (masks.size() != agg.rows)
    throw InvalidArgument("mask count " + std::to_string(masks.size()) +
                          " does not match proposal count " +
                          std::to_string(agg.rows));
  std::vector<LabeledDetection> out;
  out.reserve(agg.rows);
  for (std::size_t i = 0; i < agg.rows; ++i) {
    const auto row = agg.row(i);
    std::size_t best = 0;
    for (std::size_t o = 1; o < row.size(); ++o)
      if (row[o] > row[best]) best = o;
    out.push_back({masks[i], labels[best], best, row[best], i});
  }
  return out;
}

inline std::vector<LabeledDetection> match_proposals(
    const ProposalDescriptors& p, std::span<const Rle> masks,
    const ReferenceSet& r, const AggregationMethod& method,
    std::size_t workers = 1) {
  if (r.n_objects() == 0)
    throw InvalidArgument("cannot match against an empty reference set");
  if (masks.size() != p.size())
    throw InvalidArgument("mask count " + std::to_string(masks.size()) +
                          " does not match proposal count " +
                          std::to_string(p.size()));
  const SimilarityTensor t = similarity_tensor(p, r, workers);
  const ScoreMatrix agg = aggregate_views(t, method, workers);
  return assign_objects(agg, r.object_labels, masks);
}

// The min(k, N_V) best views of one (proposal, object) pair, descending,
// ties towards the lower view index.
inline std::vector<TemplateHit> top_k_templates(const SimilarityTensor& t,
                                                std::size_t proposal,
                                                std::size_t object,
                                                std::size_t k) {
  if (k < 1) throw InvalidArgument("top-k retrieval needs k >= 1");
  if (proposal >= t.n_proposals || object >= t.n_objects)
    throw InvalidArgument("proposal/object index out of range");
  const auto views = t.views(proposal, object);
  std::vector<std::size_t> order(views.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + n, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return views[a] > views[b] || (views[a] == views[b] && a < b);
                    });
  std::vector<TemplateHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    hits.push_back({order[i], views[order[i]]});
  return hits;
}

}  // namespace cnos
