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

// Command implementations behind the `cnos` tool. Each run_* function does
// the whole job of one subcommand and throws cnos::Error subclasses; exit
// code mapping lives in exit_code_for().

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cnos/descriptor.hpp"
#include "cnos/descriptor_io.hpp"
#include "cnos/error.hpp"
#include "cnos/evaluator.hpp"
#include "cnos/json_io.hpp"
#include "cnos/mask.hpp"
#include "cnos/matcher.hpp"
#include "cnos/parallel.hpp"
#include "cnos/synth.hpp"
#include "cnos/viewsphere.hpp"

namespace cnos {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3 };

inline int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidArgument*>(&e))
    return kExitConfig;
  return kExitData;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// `<dir>/<stem><suffix>` next to `path`, e.g. det.json -> det.filtered.json.
inline std::string sibling_path(const std::string& path, const std::string& suffix) {
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

// ---------------------------------------------------------------------------
// viewpoints

inline ViewpointSet run_viewpoints(int level, double radius, const std::string& out) {
  ViewpointSet set = generate_viewpoint_set(level, radius);
  write_viewpoints(set, out);
  return set;
}

// ---------------------------------------------------------------------------
// match

struct RunConfig {
  std::string reference_path;
  std::string manifest_path;
  // Single-image alternative to a manifest.
  std::string proposals_path;
  std::string masks_path;
  int scene_id = 0;
  int image_id = 0;

  std::string output_path = "detections.json";
  AggregationMethod aggregation = AggregationMethod::mean_top_k(5);
  double report_threshold = 0.5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// Overlays keys present in a JSON config document onto `cfg`.
inline void apply_config_json(const json& doc, RunConfig& cfg) {
  try {
    if (doc.contains("reference_path")) cfg.reference_path = doc["reference_path"].get<std::string>();
    if (doc.contains("manifest_path")) cfg.manifest_path = doc["manifest_path"].get<std::string>();
    if (doc.contains("proposals_path")) cfg.proposals_path = doc["proposals_path"].get<std::string>();
    if (doc.contains("masks_path")) cfg.masks_path = doc["masks_path"].get<std::string>();
    if (doc.contains("output_path")) cfg.output_path = doc["output_path"].get<std::string>();
    if (doc.contains("report_threshold")) cfg.report_threshold = doc["report_threshold"].get<double>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("workers")) cfg.workers = doc["workers"].get<std::size_t>();
    if (doc.contains("aggregation")) {
      const std::size_t k = doc.value("topk", cfg.aggregation.k);
      cfg.aggregation = parse_aggregation(doc["aggregation"].get<std::string>(), k);
    } else if (doc.contains("topk")) {
      cfg.aggregation.k = doc["topk"].get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

struct StageTimings {
  double load_reference = 0.0;
  double load_proposals = 0.0;
  double matching = 0.0;  // similarity + aggregation + assignment
  double write = 0.0;
  double declared_proposal = 0.0;  // summed from manifest "time" fields
};

struct MatchSummary {
  std::size_t images = 0;
  std::size_t detections = 0;
  std::size_t reported = 0;  // score above the report threshold
  std::size_t dropped_empty = 0;
  std::size_t renormalized_rows = 0;
  StageTimings timings;
};

namespace detail {

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing ") + what + " path");
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError(std::string(what) + " '" + path + "' does not exist");
}

struct ImageResult {
  std::vector<DetectionRecord> detections;
  std::size_t dropped_empty = 0;
  std::size_t renormalized_rows = 0;
  double load_seconds = 0.0;
  double match_seconds = 0.0;
  std::vector<std::string> warnings;
};

inline ImageResult match_image(const ManifestEntry& entry, const ReferenceSet& ref,
                               const AggregationMethod& method) {
  ImageResult result;
  const auto t0 = Clock::now();
  ProposalDescriptors props = load_proposals(entry.descriptors, &result.renormalized_rows);
  std::vector<Rle> masks = read_masks_file(entry.masks);
  result.load_seconds = seconds_since(t0);

  if (!props.empty() && props.dim != ref.dim)
    throw ConfigError("proposal descriptors '" + entry.descriptors + "' have dim " +
                      std::to_string(props.dim) + ", reference has " +
                      std::to_string(ref.dim));
  if (masks.size() != props.size())
    throw ValidationError("'" + entry.masks + "' holds " + std::to_string(masks.size()) +
                          " masks for " + std::to_string(props.size()) + " proposals");

  // Empty proposals are dropped with a warning rather than failing the run.
  ProposalDescriptors kept;
  kept.dim = ref.dim;
  std::vector<Rle> kept_masks;
  std::vector<BBox> boxes;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (entry.height > 0 && (masks[i].height != entry.height || masks[i].width != entry.width))
      throw ValidationError("'" + entry.masks + "' mask " + std::to_string(i) +
                            " size does not match declared image size");
    if (rle_area(masks[i]) == 0) {
      ++result.dropped_empty;
      result.warnings.push_back("'" + entry.masks + "': dropping empty proposal " +
                                std::to_string(i));
      continue;
    }
    boxes.push_back(bbox_from_mask(rle_decode(masks[i])));
    const auto row = props.row(i);
    kept.values.insert(kept.values.end(), row.begin(), row.end());
    kept_masks.push_back(std::move(masks[i]));
  }

  const auto t1 = Clock::now();
  std::vector<LabeledDetection> dets = match_proposals(kept, kept_masks, ref, method);
  result.match_seconds = seconds_since(t1);

  for (std::size_t k = 0; k < dets.size(); ++k) {
    DetectionRecord rec;
    rec.scene_id = entry.scene_id;
    rec.image_id = entry.image_id;
    rec.category_id = category_id_for(dets[k].object_label, dets[k].object_index);
    rec.object_label = dets[k].object_label;
    rec.score = dets[k].score;
    rec.bbox = boxes[k];
    rec.segmentation = std::move(dets[k].mask);
    rec.time = entry.time;
    result.detections.push_back(std::move(rec));
  }
  return result;
}

}  // namespace detail

inline MatchSummary run_match(const RunConfig& cfg, std::ostream& log = std::cerr) {
  detail::require_file(cfg.reference_path, "reference");
  std::vector<ManifestEntry> entries;
  if (!cfg.manifest_path.empty()) {
    detail::require_file(cfg.manifest_path, "manifest");
    entries = read_manifest_file(cfg.manifest_path);
  } else {
    detail::require_file(cfg.proposals_path, "proposals");
    detail::require_file(cfg.masks_path, "masks");
    entries.push_back({cfg.scene_id, cfg.image_id, cfg.proposals_path, cfg.masks_path});
  }
  for (const auto& e : entries) {
    detail::require_file(e.descriptors, "proposal descriptors");
    detail::require_file(e.masks, "masks");
  }
  if (cfg.aggregation.k < 1) throw ConfigError("--topk must be >= 1");
  if (cfg.output_path.empty()) throw ConfigError("missing output path");

  MatchSummary summary;
  auto t0 = Clock::now();
  const ReferenceSet ref = load_reference_set(cfg.reference_path, &summary.renormalized_rows);
  summary.timings.load_reference = seconds_since(t0);
  if (summary.renormalized_rows > 0)
    log << "warning: " << summary.renormalized_rows
        << " reference rows were not unit-norm and were renormalized\n";

  std::vector<detail::ImageResult> results(entries.size());
  parallel_for(entries.size(), cfg.workers, [&](std::size_t i) {
    results[i] = detail::match_image(entries[i], ref, cfg.aggregation);
  });

  std::vector<DetectionRecord> all;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& r = results[i];
    for (const auto& w : r.warnings) log << "warning: " << w << "\n";
    if (r.renormalized_rows > 0)
      log << "warning: " << r.renormalized_rows << " proposal rows in '"
          << entries[i].descriptors << "' were renormalized\n";
    summary.dropped_empty += r.dropped_empty;
    summary.renormalized_rows += r.renormalized_rows;
    summary.timings.load_proposals += r.load_seconds;
    summary.timings.matching += r.match_seconds;
    if (entries[i].time > 0.0) summary.timings.declared_proposal += entries[i].time;
    std::move(r.detections.begin(), r.detections.end(), std::back_inserter(all));
  }
  summary.images = entries.size();
  summary.detections = all.size();

  std::vector<DetectionRecord> reported;
  for (const auto& d : all)
    if (d.score > cfg.report_threshold) reported.push_back(d);
  summary.reported = reported.size();

  t0 = Clock::now();
  write_json_file(cfg.output_path, detections_to_json(all), -1);
  write_json_file(sibling_path(cfg.output_path, ".filtered.json"),
                  {{"report_threshold", cfg.report_threshold},
                   {"detections", detections_to_json(reported)}},
                  -1);
  summary.timings.write = seconds_since(t0);

  const auto& t = summary.timings;
  write_json_file(sibling_path(cfg.output_path, ".timing.json"),
                  {{"images", summary.images},
                   {"detections", summary.detections},
                   {"dropped_empty", summary.dropped_empty},
                   {"aggregation", to_string(cfg.aggregation)},
                   {"topk", cfg.aggregation.k},
                   {"workers", cfg.workers},
                   {"seed", cfg.seed},
                   {"seconds",
                    {{"load_reference", t.load_reference},
                     {"load_proposals", t.load_proposals},
                     {"matching", t.matching},
                     {"write", t.write},
                     {"proposal_declared", t.declared_proposal}}}});
  return summary;
}

// ---------------------------------------------------------------------------
// eval

inline ApReport run_eval(const std::string& detections_path,
                         const std::string& annotations_path,
                         const std::string& out_path) {
  detail::require_file(detections_path, "detections");
  detail::require_file(annotations_path, "annotations");
  if (out_path.empty()) throw ConfigError("missing output path");
  const std::vector<EvalDetection> dets = read_detections_file(detections_path);
  const Annotations ann = read_annotations_file(annotations_path);
  ApReport report = ap_coco(dets, ann.instances, ann.object_labels);
  write_json_file(out_path, to_json(report));
  write_text_file(sibling_path(out_path, ".txt"), report_table(report));
  return report;
}

// ---------------------------------------------------------------------------
// synth

struct SynthParams {
  std::size_t n_objects = 10;
  std::size_t n_views = 42;
  std::size_t dim = 1024;
  double view_noise = 0.0;
  double proposal_noise = 0.0;
  std::size_t n_proposals = 100;
  std::size_t per_image = 10;
  int height = 480;
  int width = 640;
  std::uint64_t seed = 0;
};

struct SynthOutput {
  std::string reference_path;
  std::string manifest_path;
  std::string annotations_path;
  std::vector<std::size_t> assignments;
};

// Non-overlapping rectangular masks, one per proposal, laid out on a grid.
inline std::vector<Rle> synth_masks(std::size_t count, int height, int width,
                                    std::mt19937_64& rng) {
  std::vector<Rle> out;
  if (count == 0) return out;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
  const int rows = static_cast<int>((count + cols - 1) / cols);
  const int cell_w = width / cols, cell_h = height / rows;
  if (cell_w < 2 || cell_h < 2)
    throw InvalidArgument("image too small for the requested proposals per image");
  for (std::size_t i = 0; i < count; ++i) {
    const int cx = static_cast<int>(i % cols) * cell_w;
    const int cy = static_cast<int>(i / cols) * cell_h;
    std::uniform_int_distribution<int> w_dist(std::max(1, cell_w / 2), cell_w - 1);
    std::uniform_int_distribution<int> h_dist(std::max(1, cell_h / 2), cell_h - 1);
    const int w = w_dist(rng), h = h_dist(rng);
    const int x = cx + std::uniform_int_distribution<int>(0, cell_w - w)(rng);
    const int y = cy + std::uniform_int_distribution<int>(0, cell_h - h)(rng);
    BinaryMask m(height, width);
    for (int r = y; r < y + h; ++r)
      for (int c = x; c < x + w; ++c) m.set(r, c);
    out.push_back(rle_encode(m));
  }
  return out;
}

inline SynthOutput run_synth(const SynthParams& p, const std::string& out_dir) {
  if (p.n_objects < 1 || p.n_views < 1 || p.dim < 1 || p.per_image < 1)
    throw ConfigError("synth needs n_objects, n_views, dim, per_image >= 1");
  if (p.height < 1 || p.width < 1) throw ConfigError("synth image size must be positive");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  const std::filesystem::path dir(out_dir);

  const SyntheticReference ref =
      synth_reference_set(p.n_objects, p.n_views, p.dim, p.seed, p.view_noise);
  SynthOutput out;
  out.reference_path = (dir / "reference.cnosdsc").string();
  save_descriptors(ref.reference, out.reference_path);

  std::mt19937_64 layout_rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, p.n_objects - 1);
  for (std::size_t i = 0; i < p.n_proposals; ++i) out.assignments.push_back(pick(layout_rng));
  const ProposalDescriptors props =
      synth_proposals(ref, out.assignments, p.proposal_noise, p.seed + 1);

  Annotations ann;
  ann.object_labels = ref.reference.object_labels;
  std::vector<ManifestEntry> manifest;
  const std::size_t n_images = (p.n_proposals + p.per_image - 1) / p.per_image;
  for (std::size_t img = 0; img < std::max<std::size_t>(n_images, 1); ++img) {
    const std::size_t begin = img * p.per_image;
    const std::size_t end = std::min(p.n_proposals, begin + p.per_image);
    const std::size_t count = end > begin ? end - begin : 0;
    const int image_id = static_cast<int>(img);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%06d", image_id);

    ProposalDescriptors slice;
    slice.dim = p.dim;
    slice.values.assign(props.values.begin() + begin * p.dim,
                        props.values.begin() + (begin + count) * p.dim);
    const std::vector<Rle> masks = synth_masks(count, p.height, p.width, layout_rng);

    ManifestEntry e;
    e.scene_id = 1;
    e.image_id = image_id;
    e.descriptors = std::string("proposals_") + stem + ".cnosdsc";
    e.masks = std::string("masks_") + stem + ".json";
    e.height = p.height;
    e.width = p.width;
    save_descriptors(slice, (dir / e.descriptors).string());
    write_masks_file((dir / e.masks).string(), masks);
    manifest.push_back(e);

    ann.images.push_back({1, image_id, p.height, p.width});
    for (std::size_t k = 0; k < count; ++k)
      ann.instances.push_back({1, image_id,
                               ref.reference.object_labels[out.assignments[begin + k]],
                               masks[k], false});
  }
  out.manifest_path = (dir / "manifest.json").string();
  write_json_file(out.manifest_path, manifest_to_json(manifest));
  out.annotations_path = (dir / "annotations.json").string();
  write_json_file(out.annotations_path, to_json(ann));
  return out;
}

// ---------------------------------------------------------------------------
// bench

struct BenchParams {
  std::size_t n_proposals = 100;
  std::size_t n_objects = 132;
  std::size_t n_views = 42;
  std::size_t dim = 1024;
  AggregationMethod aggregation = AggregationMethod::mean_top_k(5);
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct BenchReport {
  BenchParams params;
  std::vector<double> samples;  // total seconds per repeat
  double median = 0.0;
  double p95 = 0.0;
  double similarity_median = 0.0;
  double aggregation_median = 0.0;
  double assignment_median = 0.0;
  std::uint64_t flops = 0;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// Nearest-rank percentile.
inline double percentile_of(std::vector<double> v, double pct) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * v.size()));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

// Multiply-adds of the exhaustive similarity step, counted as 2 flops each.
inline std::uint64_t similarity_flops(std::size_t n_proposals, std::size_t n_objects,
                                      std::size_t n_views, std::size_t dim) {
  return 2ULL * n_proposals * n_objects * n_views * dim;
}

inline BenchReport run_bench(const BenchParams& p) {
  if (p.n_proposals < 1 || p.n_objects < 1 || p.n_views < 1 || p.dim < 1 || p.repeats < 1)
    throw ConfigError("bench parameters must all be >= 1");
  const SyntheticReference ref = synth_reference_set(p.n_objects, p.n_views, p.dim, p.seed, 0.1);
  std::vector<std::size_t> assignments(p.n_proposals);
  for (std::size_t i = 0; i < p.n_proposals; ++i) assignments[i] = i % p.n_objects;
  const ProposalDescriptors props = synth_proposals(ref, assignments, 0.1, p.seed + 1);
  const std::vector<Rle> masks(p.n_proposals, Rle{1, 1, {0, 1}});

  BenchReport report;
  report.params = p;
  report.flops = similarity_flops(p.n_proposals, p.n_objects, p.n_views, p.dim);
  std::vector<double> sim_t, agg_t, asg_t;
  for (std::size_t r = 0; r < p.repeats; ++r) {
    const auto t0 = Clock::now();
    const SimilarityTensor t = similarity_tensor(props, ref.reference, p.workers);
    const auto t1 = Clock::now();
    const ScoreMatrix agg = aggregate_views(t, p.aggregation, p.workers);
    const auto t2 = Clock::now();
    const auto dets = assign_objects(agg, ref.reference.object_labels, masks);
    const auto t3 = Clock::now();
    if (dets.size() != p.n_proposals) throw Error("bench produced a wrong detection count");
    using secs = std::chrono::duration<double>;
    sim_t.push_back(secs(t1 - t0).count());
    agg_t.push_back(secs(t2 - t1).count());
    asg_t.push_back(secs(t3 - t2).count());
    report.samples.push_back(secs(t3 - t0).count());
  }
  report.median = median_of(report.samples);
  report.p95 = percentile_of(report.samples, 95.0);
  report.similarity_median = median_of(sim_t);
  report.aggregation_median = median_of(agg_t);
  report.assignment_median = median_of(asg_t);
  return report;
}

inline json to_json(const BenchReport& r) {
  return {{"n_proposals", r.params.n_proposals},
          {"n_objects", r.params.n_objects},
          {"n_views", r.params.n_views},
          {"dim", r.params.dim},
          {"aggregation", to_string(r.params.aggregation)},
          {"topk", r.params.aggregation.k},
          {"repeats", r.params.repeats},
          {"workers", r.params.workers},
          {"similarity_flops", r.flops},
          {"median_s", r.median},
          {"p95_s", r.p95},
          {"stage_median_s",
           {{"similarity", r.similarity_median},
            {"aggregation", r.aggregation_median},
            {"assignment", r.assignment_median}}},
          {"samples_s", r.samples}};
}

inline std::string bench_summary(const BenchReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "matching N_P=%zu N_O=%zu N_V=%zu D=%zu (%s, k=%zu), %zu repeats\n"
                "  median %.4f s   p95 %.4f s\n"
                "  similarity %.4f s   aggregation %.4f s   assignment %.6f s\n"
                "  similarity flops %llu (%.2f GFLOP/s)\n",
                r.params.n_proposals, r.params.n_objects, r.params.n_views, r.params.dim,
                to_string(r.params.aggregation).c_str(), r.params.aggregation.k,
                r.params.repeats, r.median, r.p95, r.similarity_median,
                r.aggregation_median, r.assignment_median,
                static_cast<unsigned long long>(r.flops),
                r.similarity_median > 0 ? r.flops / r.similarity_median / 1e9 : 0.0);
  return buf;
}

}  // namespace cnos
