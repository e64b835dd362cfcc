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

// COCO-style mask Average Precision as used by the BOP segmentation track:
// greedy per-image matching at each IoU threshold in 0.50:0.05:0.95,
// 101-point interpolated AP per object, then means over objects and
// thresholds.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "cnos/error.hpp"
#include "cnos/mask.hpp"

namespace cnos {

struct GroundTruthInstance {
  int scene_id = 0;
  int image_id = 0;
  std::string object_label;
  Rle mask;
  bool ignore = false;
};

struct EvalDetection {
  int scene_id = 0;
  int image_id = 0;
  std::string object_label;
  double score = 0.0;
  Rle mask;
};

enum class MatchFlag { kTruePositive, kFalsePositive, kIgnored };

// IoU between detections (rows) and ground truths (columns).
struct IouMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t d, std::size_t g) const { return values[d * cols + g]; }
};

struct ScoredFlag {
  double score = 0.0;
  MatchFlag flag = MatchFlag::kFalsePositive;
};

struct ApCounts {
  std::size_t detections = 0;
  std::size_t ground_truths = 0;  // non-ignored
  std::size_t ignored_ground_truths = 0;
  std::size_t objects_evaluated = 0;
};

struct ApReport {
  std::vector<double> thresholds;
  std::vector<double> per_threshold;  // parallel to thresholds
  double mean_ap = 0.0;
  std::map<std::string, double> per_object;
  std::map<std::string, std::vector<double>> per_object_threshold;
  ApCounts counts;
};

// 0.50, 0.55, ..., 0.95, built as k/20 so that 0.6 and friends are the
// nearest doubles rather than accumulated sums.
inline std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int k = 10; k <= 19; ++k) t.push_back(k / 20.0);
  return t;
}

inline IouMatrix iou_matrix(std::span<const Rle> dets,
                            std::span<const Rle> gts) {
  IouMatrix m{dets.size(), gts.size(), std::vector<double>(dets.size() * gts.size())};
  for (std::size_t d = 0; d < dets.size(); ++d)
    for (std::size_t g = 0; g < gts.size(); ++g)
      m.values[d * gts.size() + g] = rle_iou(dets[d], gts[g]);
  return m;
}

// Greedy matching of score-sorted detections of one (image, object) against
// its ground truths. Follows the COCO reference: non-ignored ground truths
// are preferred, each ground truth is used at most once, and a detection
// matched to an ignored ground truth is itself ignored.
inline std::vector<MatchFlag> greedy_match(const IouMatrix& ious,
                                           std::span<const bool> gt_ignore,
                                           double iou_thresh) {
  if (gt_ignore.size() != ious.cols)
    throw InvalidArgument("ignore flags do not match ground-truth count");
  std::vector<std::size_t> gt_order(ious.cols);
  std::iota(gt_order.begin(), gt_order.end(), 0);
  std::stable_partition(gt_order.begin(), gt_order.end(),
                        [&](std::size_t g) { return !gt_ignore[g]; });

  std::vector<bool> gt_used(ious.cols, false);
  std::vector<MatchFlag> flags(ious.rows, MatchFlag::kFalsePositive);
  const double floor_thresh = std::min(iou_thresh, 1.0 - 1e-10);
  for (std::size_t d = 0; d < ious.rows; ++d) {
    double best = floor_thresh;
    std::ptrdiff_t match = -1;
    for (std::size_t g : gt_order) {
      if (gt_used[g]) continue;
      if (match >= 0 && !gt_ignore[match] && gt_ignore[g]) break;
      if (ious.at(d, g) < best) continue;
      best = ious.at(d, g);
      match = static_cast<std::ptrdiff_t>(g);
    }
    if (match < 0) continue;
    gt_used[match] = true;
    flags[d] = gt_ignore[match] ? MatchFlag::kIgnored : MatchFlag::kTruePositive;
  }
  return flags;
}

// 101-point interpolated AP. `entries` must already be in ranking order
// (descending score, ties in input order); ignored entries are skipped.
inline double ap_at_threshold(std::span<const ScoredFlag> entries,
                              std::size_t n_gt) {
  if (n_gt == 0) return 0.0;
  std::vector<double> recall, precision;
  std::size_t tp = 0, fp = 0;
  for (const auto& e : entries) {
    if (e.flag == MatchFlag::kIgnored) continue;
    (e.flag == MatchFlag::kTruePositive ? tp : fp) += 1;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  for (std::size_t i = precision.size(); i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (int j = 0; j <= 100; ++j) {
    const double r = j / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[it - recall.begin()];
  }
  return sum / 101.0;
}

// Sorts entries by descending score; equal scores keep their input order.
inline void rank_entries(std::vector<ScoredFlag>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ScoredFlag& a, const ScoredFlag& b) {
                     return a.score > b.score;
                   });
}

// `known_labels` extends the vocabulary beyond the labels present in `gts`;
// a detection whose label is in neither raises a ValidationError.
inline ApReport ap_coco(std::span<const EvalDetection> dets,
                        std::span<const GroundTruthInstance> gts,
                        std::span<const std::string> known_labels = {}) {
  std::set<std::string> vocabulary(known_labels.begin(), known_labels.end());
  for (const auto& g : gts) vocabulary.insert(g.object_label);
  std::set<std::string> unknown;
  for (const auto& d : dets)
    if (!vocabulary.count(d.object_label)) unknown.insert(d.object_label);
  if (!unknown.empty()) {
    std::string msg = "detections reference unknown object labels:";
    for (const auto& l : unknown) msg += " " + l;
    throw ValidationError(msg);
  }

  using GroupKey = std::tuple<std::string, int, int>;  // label, scene, image
  struct Group {
    std::vector<std::size_t> dets;
    std::vector<std::size_t> gts;
  };
  std::map<GroupKey, Group> groups;
  for (std::size_t i = 0; i < dets.size(); ++i)
    groups[{dets[i].object_label, dets[i].scene_id, dets[i].image_id}]
        .dets.push_back(i);
  for (std::size_t i = 0; i < gts.size(); ++i)
    groups[{gts[i].object_label, gts[i].scene_id, gts[i].image_id}]
        .gts.push_back(i);

  ApReport report;
  report.thresholds = coco_iou_thresholds();
  const std::size_t n_thr = report.thresholds.size();
  report.counts.detections = dets.size();

  std::map<std::string, std::size_t> n_gt;
  for (const auto& g : gts) {
    if (g.ignore) {
      ++report.counts.ignored_ground_truths;
    } else {
      ++report.counts.ground_truths;
      ++n_gt[g.object_label];
    }
  }

  // Per label and threshold: (input index, score, flag) of every detection.
  struct Ranked {
    std::size_t input_index;
    ScoredFlag entry;
  };
  std::map<std::string, std::vector<std::vector<Ranked>>> per_label;

  for (auto& [key, group] : groups) {
    auto& buckets = per_label[std::get<0>(key)];
    buckets.resize(n_thr);
    std::stable_sort(group.dets.begin(), group.dets.end(),
                     [&](std::size_t a, std::size_t b) {
                       return dets[a].score > dets[b].score;
                     });
    std::vector<Rle> det_masks, gt_masks;
    auto ignore = std::make_unique<bool[]>(group.gts.size());
    for (auto d : group.dets) det_masks.push_back(dets[d].mask);
    for (std::size_t k = 0; k < group.gts.size(); ++k) {
      gt_masks.push_back(gts[group.gts[k]].mask);
      ignore[k] = gts[group.gts[k]].ignore;
    }
    const IouMatrix ious = iou_matrix(det_masks, gt_masks);
    for (std::size_t t = 0; t < n_thr; ++t) {
      const auto flags = greedy_match(
          ious, std::span<const bool>(ignore.get(), group.gts.size()),
          report.thresholds[t]);
      for (std::size_t k = 0; k < group.dets.size(); ++k)
        buckets[t].push_back({group.dets[k], {dets[group.dets[k]].score, flags[k]}});
    }
  }

  report.per_threshold.assign(n_thr, 0.0);
  for (auto& [label, buckets] : per_label) {
    const auto it = n_gt.find(label);
    if (it == n_gt.end()) continue;  // no non-ignored ground truth
    std::vector<double> aps(n_thr, 0.0);
    for (std::size_t t = 0; t < n_thr; ++t) {
      auto& bucket = buckets[t];
      std::sort(bucket.begin(), bucket.end(), [](const Ranked& a, const Ranked& b) {
        if (a.entry.score != b.entry.score) return a.entry.score > b.entry.score;
        return a.input_index < b.input_index;
      });
      std::vector<ScoredFlag> entries;
      entries.reserve(bucket.size());
      for (const auto& r : bucket) entries.push_back(r.entry);
      aps[t] = ap_at_threshold(entries, it->second);
      report.per_threshold[t] += aps[t];
    }
    report.per_object[label] =
        std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(n_thr);
    report.per_object_threshold[label] = std::move(aps);
  }
  report.counts.objects_evaluated = report.per_object.size();
  if (report.counts.objects_evaluated > 0)
    for (auto& v : report.per_threshold)
      v /= static_cast<double>(report.counts.objects_evaluated);
  report.mean_ap = std::accumulate(report.per_threshold.begin(),
                                   report.per_threshold.end(), 0.0) /
                   static_cast<double>(n_thr);
  return report;
}

}  // namespace cnos
