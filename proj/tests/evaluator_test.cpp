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

#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "cnos/evaluator.hpp"
#include "oracles.hpp"

namespace cnos {
namespace {

constexpr auto TP = MatchFlag::kTruePositive;
constexpr auto FP = MatchFlag::kFalsePositive;
constexpr auto IG = MatchFlag::kIgnored;

// Row of `n` pixels starting at column `begin` in an 8x8 mask.
Rle strip(int begin, int n, int row = 0) {
  BinaryMask m(8, 8);
  for (int c = begin; c < begin + n; ++c) m.set(row, c);
  return rle_encode(m);
}

TEST(Thresholds, TenStepsFromHalf) {
  const auto t = coco_iou_thresholds();
  ASSERT_EQ(t.size(), 10u);
  EXPECT_EQ(t.front(), 0.5);
  EXPECT_EQ(t[2], 0.6);
  EXPECT_EQ(t.back(), 0.95);
}

TEST(GreedyMatch, PerfectMatchAndBelowThreshold) {
  const std::vector<Rle> gt{strip(0, 5)};
  const bool no_ignore[1] = {false};
  EXPECT_EQ(greedy_match(iou_matrix(gt, gt), no_ignore, 0.5), (std::vector{TP}));
  const std::vector<Rle> det{strip(0, 3)};  // IoU 3/5
  EXPECT_EQ(greedy_match(iou_matrix(det, gt), no_ignore, 0.75), (std::vector{FP}));
  EXPECT_EQ(greedy_match(iou_matrix(det, gt), no_ignore, 0.6), (std::vector{TP}));
}

TEST(GreedyMatch, GroundTruthUsedOnce) {
  const std::vector<Rle> gt{strip(0, 5)};
  const std::vector<Rle> dets{strip(0, 5), strip(0, 4)};
  const bool no_ignore[1] = {false};
  EXPECT_EQ(greedy_match(iou_matrix(dets, gt), no_ignore, 0.5), (std::vector{TP, FP}));
}

TEST(GreedyMatch, PrefersHighestIouAmongUnmatched) {
  const std::vector<Rle> gts{strip(0, 4), strip(0, 6)};
  const std::vector<Rle> dets{strip(0, 6), strip(0, 4)};
  const bool no_ignore[2] = {false, false};
  const auto flags = greedy_match(iou_matrix(dets, gts), no_ignore, 0.5);
  EXPECT_EQ(flags, (std::vector{TP, TP}));
}

TEST(GreedyMatch, IgnoredGroundTruth) {
  const std::vector<Rle> gts{strip(0, 5, 0), strip(0, 5, 3)};
  const bool ignore[2] = {false, true};
  // Matches the non-ignored GT first, then the ignored one.
  const std::vector<Rle> dets{strip(0, 5, 3), strip(0, 5, 0)};
  EXPECT_EQ(greedy_match(iou_matrix(dets, gts), ignore, 0.5), (std::vector{IG, TP}));
}

TEST(ApAtThreshold, NamedCases) {
  const std::vector<ScoredFlag> one{{0.9, TP}};
  EXPECT_DOUBLE_EQ(ap_at_threshold(one, 1), 1.0);
  EXPECT_DOUBLE_EQ(ap_at_threshold({}, 3), 0.0);
  EXPECT_DOUBLE_EQ(ap_at_threshold({}, 0), 0.0);

  const std::vector<ScoredFlag> mixed{{0.9, TP}, {0.8, FP}, {0.7, TP}};
  // Precision 1 on recall 0..0.50 (51 grid points), 2/3 on 0.51..1.00 (50).
  const double expected = oracle::brute_force_ap(mixed, 2);
  EXPECT_NEAR(expected, 0.8349834983498351, 1e-15);
  EXPECT_NEAR(ap_at_threshold(mixed, 2), 0.8349834983498351, 1e-12);

  const std::vector<ScoredFlag> with_ignored{{0.9, TP}, {0.85, IG}, {0.8, FP}, {0.7, TP}};
  EXPECT_NEAR(ap_at_threshold(with_ignored, 2), 0.8349834983498351, 1e-12);
}

TEST(ApAtThreshold, MatchesBruteForceOnRandomLists) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = rng() % 25;
    std::vector<ScoredFlag> list;
    std::size_t tps = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto f = static_cast<MatchFlag>(rng() % 3);
      tps += f == TP;
      list.push_back({static_cast<double>(rng() % 10) / 10.0, f});
    }
    rank_entries(list);
    const std::size_t n_gt = tps + rng() % 4;
    EXPECT_NEAR(ap_at_threshold(list, n_gt), oracle::brute_force_ap(list, n_gt), 1e-12);
  }
}

struct RandomSet {
  std::vector<EvalDetection> dets;
  std::vector<GroundTruthInstance> gts;
};

// A few 12x12 images, two objects, <= 5 GT and <= 10 detections per image;
// detections are noisy copies of GT masks or random blobs.
RandomSet random_set(std::mt19937_64& rng) {
  RandomSet s;
  const int images = 1 + static_cast<int>(rng() % 3);
  const char* labels[] = {"obj_a", "obj_b"};
  for (int img = 0; img < images; ++img) {
    std::vector<BinaryMask> gt_masks;
    for (std::size_t g = 0; g < rng() % 6; ++g) {
      BinaryMask m = oracle::random_mask_sized(rng, 12, 12, 0.0);
      const int r0 = static_cast<int>(rng() % 8), c0 = static_cast<int>(rng() % 8);
      for (int r = r0; r < r0 + 4; ++r)
        for (int c = c0; c < c0 + 4; ++c) m.set(r, c);
      gt_masks.push_back(m);
      s.gts.push_back({0, img, labels[rng() % 2], rle_encode(m), rng() % 5 == 0});
    }
    const std::size_t n_det = rng() % 11;
    for (std::size_t d = 0; d < n_det; ++d) {
      BinaryMask m = (!gt_masks.empty() && rng() % 3)
                         ? gt_masks[rng() % gt_masks.size()]
                         : oracle::random_mask_sized(rng, 12, 12, 0.1);
      for (int flips = static_cast<int>(rng() % 6); flips > 0; --flips) {
        const int r = static_cast<int>(rng() % 12), c = static_cast<int>(rng() % 12);
        m.set(r, c, !m.at(r, c));
      }
      s.dets.push_back({0, img, labels[rng() % 2],
                        static_cast<double>(rng() % 20) / 20.0, rle_encode(m)});
    }
  }
  return s;
}

TEST(ApCoco, PerThresholdMatchesBruteForceOnRandomSets) {
  std::mt19937_64 rng(31337);
  int partial = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const RandomSet s = random_set(rng);
    const ApReport report = ap_coco(s.dets, s.gts, std::vector<std::string>{"obj_a", "obj_b"});
    // Recompute each (object, threshold) AP from the matcher's flags with the
    // brute-force PR oracle.
    for (const auto& [label, aps] : report.per_object_threshold) {
      std::size_t n_gt = 0;
      for (const auto& g : s.gts) n_gt += (g.object_label == label && !g.ignore);
      for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
        std::vector<std::pair<std::size_t, ScoredFlag>> all;
        std::map<std::pair<int, int>, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> per_image;
        for (std::size_t i = 0; i < s.dets.size(); ++i)
          if (s.dets[i].object_label == label)
            per_image[{s.dets[i].scene_id, s.dets[i].image_id}].first.push_back(i);
        for (std::size_t i = 0; i < s.gts.size(); ++i)
          if (s.gts[i].object_label == label)
            per_image[{s.gts[i].scene_id, s.gts[i].image_id}].second.push_back(i);
        for (auto& [key, idx] : per_image) {
          auto& [di, gi] = idx;
          std::stable_sort(di.begin(), di.end(), [&](std::size_t a, std::size_t b) {
            return s.dets[a].score > s.dets[b].score;
          });
          std::vector<Rle> dm, gm;
          auto ignore = std::make_unique<bool[]>(gi.size() + 1);
          for (auto d : di) dm.push_back(s.dets[d].mask);
          for (std::size_t k = 0; k < gi.size(); ++k) {
            gm.push_back(s.gts[gi[k]].mask);
            ignore[k] = s.gts[gi[k]].ignore;
          }
          const auto flags = greedy_match(iou_matrix(dm, gm),
                                          std::span<const bool>(ignore.get(), gi.size()),
                                          report.thresholds[t]);
          for (std::size_t k = 0; k < di.size(); ++k)
            all.push_back({di[k], {s.dets[di[k]].score, flags[k]}});
        }
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
          return a.second.score > b.second.score ||
                 (a.second.score == b.second.score && a.first < b.first);
        });
        std::vector<ScoredFlag> ranked;
        for (const auto& e : all) ranked.push_back(e.second);
        EXPECT_NEAR(aps[t], oracle::brute_force_ap(ranked, n_gt), 1e-9);
      }
    }
    const double mean = std::accumulate(report.per_threshold.begin(),
                                        report.per_threshold.end(), 0.0) / 10.0;
    EXPECT_NEAR(report.mean_ap, mean, 1e-12);
    EXPECT_GE(report.mean_ap, 0.0);
    EXPECT_LE(report.mean_ap, 1.0);
    partial += report.mean_ap > 0.0 && report.mean_ap < 1.0;
  }
  // The generator must exercise non-trivial precision/recall curves.
  EXPECT_GT(partial, 50);
}

TEST(ApCoco, SingleDetectionIouPointSix) {
  const std::vector<GroundTruthInstance> gts{{0, 0, "obj_000001", strip(0, 5), false}};
  const std::vector<EvalDetection> dets{{0, 0, "obj_000001", 0.7, strip(0, 3)}};
  const ApReport r = ap_coco(dets, gts);
  for (std::size_t t = 0; t < 10; ++t)
    EXPECT_DOUBLE_EQ(r.per_threshold[t], t < 3 ? 1.0 : 0.0) << r.thresholds[t];
  EXPECT_NEAR(r.mean_ap, 0.3, 1e-12);
}

TEST(ApCoco, PerfectDetectorAndWrongObjects) {
  std::vector<GroundTruthInstance> gts{{0, 0, "a", strip(0, 5, 0), false},
                                       {0, 0, "b", strip(0, 5, 2), false},
                                       {0, 1, "a", strip(2, 4, 4), false}};
  std::vector<EvalDetection> perfect, wrong;
  for (const auto& g : gts) {
    perfect.push_back({g.scene_id, g.image_id, g.object_label, 0.9, g.mask});
    wrong.push_back({g.scene_id, g.image_id, g.object_label == "a" ? "b" : "a", 0.9, g.mask});
  }
  const ApReport p = ap_coco(perfect, gts);
  EXPECT_DOUBLE_EQ(p.mean_ap, 1.0);
  EXPECT_EQ(p.counts.objects_evaluated, 2u);
  EXPECT_DOUBLE_EQ(ap_coco(wrong, gts).mean_ap, 0.0);
}

TEST(ApCoco, UnknownLabelIsValidationError) {
  const std::vector<GroundTruthInstance> gts{{0, 0, "a", strip(0, 5), false}};
  const std::vector<EvalDetection> dets{{0, 0, "zzz", 0.5, strip(0, 5)}};
  try {
    ap_coco(dets, gts);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
  }
  EXPECT_NO_THROW(ap_coco(dets, gts, std::vector<std::string>{"zzz"}));
}

TEST(ApCoco, ObjectsWithoutGroundTruthAreExcluded) {
  const std::vector<GroundTruthInstance> gts{{0, 0, "a", strip(0, 5), false}};
  const std::vector<EvalDetection> dets{{0, 0, "a", 0.9, strip(0, 5)},
                                        {0, 0, "b", 0.9, strip(0, 5, 3)}};
  const ApReport r = ap_coco(dets, gts, std::vector<std::string>{"a", "b"});
  EXPECT_DOUBLE_EQ(r.mean_ap, 1.0);
  EXPECT_EQ(r.per_object.count("b"), 0u);
}

TEST(ApCoco, IgnoredGroundTruthNeitherCountsNorPenalizes) {
  const std::vector<GroundTruthInstance> gts{{0, 0, "a", strip(0, 5, 0), false},
                                             {0, 0, "a", strip(0, 5, 3), true}};
  const std::vector<EvalDetection> dets{{0, 0, "a", 0.9, strip(0, 5, 3)},
                                        {0, 0, "a", 0.8, strip(0, 5, 0)}};
  const ApReport r = ap_coco(dets, gts);
  EXPECT_DOUBLE_EQ(r.mean_ap, 1.0);
  EXPECT_EQ(r.counts.ground_truths, 1u);
  EXPECT_EQ(r.counts.ignored_ground_truths, 1u);
}

TEST(ApCoco, RemovingFalsePositiveNeverLowersAp) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    RandomSet s = random_set(rng);
    if (s.dets.empty()) continue;
    const ApReport before = ap_coco(s.dets, s.gts, std::vector<std::string>{"obj_a", "obj_b"});
    // A detection that overlaps nothing of its label is an FP at every threshold.
    for (std::size_t i = 0; i < s.dets.size(); ++i) {
      bool overlaps = false;
      for (const auto& g : s.gts)
        overlaps |= g.object_label == s.dets[i].object_label &&
                    g.image_id == s.dets[i].image_id && rle_iou(g.mask, s.dets[i].mask) > 0;
      if (overlaps) continue;
      auto fewer = s.dets;
      fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(i));
      const ApReport after = ap_coco(fewer, s.gts, std::vector<std::string>{"obj_a", "obj_b"});
      for (std::size_t t = 0; t < 10; ++t)
        EXPECT_GE(after.per_threshold[t], before.per_threshold[t] - 1e-15);
      break;
    }
  }
}

TEST(ApCoco, InvariantUnderIncreasingScoreTransform) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    RandomSet s = random_set(rng);
    const ApReport a = ap_coco(s.dets, s.gts, std::vector<std::string>{"obj_a", "obj_b"});
    for (auto& d : s.dets) d.score = std::exp(3.0 * d.score) - 7.0;
    const ApReport b = ap_coco(s.dets, s.gts, std::vector<std::string>{"obj_a", "obj_b"});
    EXPECT_EQ(a.per_threshold, b.per_threshold);
    EXPECT_EQ(a.mean_ap, b.mean_ap);
  }
}

}  // namespace
}  // namespace cnos
