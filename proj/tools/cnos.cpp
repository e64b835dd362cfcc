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

// Command-line front end: viewpoints, match, eval, synth, bench.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cnos/app.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Template matching and mask-AP evaluation for CAD-based novel object segmentation"};
  app.require_subcommand(1);

  // viewpoints
  int vp_level = 1;
  double vp_radius = 1.0;
  std::string vp_out = "viewpoints.json";
  auto* vp = app.add_subcommand("viewpoints", "Write icosphere camera poses as JSON");
  vp->add_option("--level", vp_level, "Subdivision level (0: 12, 1: 42, 2: 162 views)")
      ->capture_default_str();
  vp->add_option("--radius", vp_radius, "Camera distance from the object center")
      ->capture_default_str();
  vp->add_option("--out", vp_out, "Output JSON path")->capture_default_str();

  // match
  cnos::RunConfig cfg;
  std::string config_path, aggregation = "mean-topk";
  std::size_t topk = 5;
  auto* match = app.add_subcommand("match", "Label proposals against a reference set");
  match->add_option("--config", config_path, "JSON config mirroring the run options");
  auto* o_ref = match->add_option("--ref", cfg.reference_path, "Reference descriptor file (rank 3)");
  auto* o_manifest = match->add_option("--manifest", cfg.manifest_path, "Per-image manifest JSON");
  auto* o_props = match->add_option("--proposals", cfg.proposals_path, "Single-image proposal descriptors (rank 2)");
  auto* o_masks = match->add_option("--masks", cfg.masks_path, "Single-image masks JSON");
  auto* o_scene = match->add_option("--scene-id", cfg.scene_id, "Scene id for --proposals");
  auto* o_image = match->add_option("--image-id", cfg.image_id, "Image id for --proposals");
  auto* o_agg = match->add_option("--aggregation", aggregation, "View aggregation")
                    ->check(CLI::IsMember({"mean", "median", "max", "mean-topk"}))
                    ->capture_default_str();
  auto* o_topk = match->add_option("--topk", topk, "k for mean-topk")->capture_default_str();
  auto* o_thr = match->add_option("--report-threshold", cfg.report_threshold,
                                  "Score threshold for the filtered listing")
                    ->capture_default_str();
  auto* o_seed = match->add_option("--seed", cfg.seed, "Seed (recorded for reproducibility)");
  auto* o_workers = match->add_option("--workers", cfg.workers, "Worker threads over images")
                        ->capture_default_str();
  auto* o_out = match->add_option("--out", cfg.output_path, "Detections JSON path")
                    ->capture_default_str();

  // eval
  std::string ev_dets, ev_ann, ev_out = "report.json";
  auto* ev = app.add_subcommand("eval", "Mask AP of detections against annotations");
  ev->add_option("--detections", ev_dets, "Detections JSON")->required();
  ev->add_option("--annotations", ev_ann, "Annotations JSON")->required();
  ev->add_option("--out", ev_out, "Report JSON path (a .txt table is written alongside)")
      ->capture_default_str();

  // synth
  cnos::SynthParams sp;
  std::string sp_out = "synth";
  auto* sy = app.add_subcommand("synth", "Generate seeded synthetic fixtures");
  sy->add_option("--objects", sp.n_objects)->capture_default_str();
  sy->add_option("--views", sp.n_views)->capture_default_str();
  sy->add_option("--dim", sp.dim)->capture_default_str();
  sy->add_option("--view-noise", sp.view_noise, "Per-component sigma for template views")
      ->capture_default_str();
  sy->add_option("--proposal-noise", sp.proposal_noise, "Per-component sigma for proposals")
      ->capture_default_str();
  sy->add_option("--proposals", sp.n_proposals)->capture_default_str();
  sy->add_option("--per-image", sp.per_image)->capture_default_str();
  sy->add_option("--height", sp.height)->capture_default_str();
  sy->add_option("--width", sp.width)->capture_default_str();
  sy->add_option("--seed", sp.seed)->capture_default_str();
  sy->add_option("--out", sp_out, "Output directory")->capture_default_str();

  // bench
  cnos::BenchParams bp;
  std::string bp_agg = "mean-topk", bp_out;
  std::size_t bp_topk = 5;
  auto* be = app.add_subcommand("bench", "Time similarity + aggregation + assignment");
  be->add_option("--proposals", bp.n_proposals)->capture_default_str();
  be->add_option("--objects", bp.n_objects)->capture_default_str();
  be->add_option("--views", bp.n_views)->capture_default_str();
  be->add_option("--dim", bp.dim)->capture_default_str();
  be->add_option("--aggregation", bp_agg)
      ->check(CLI::IsMember({"mean", "median", "max", "mean-topk"}))
      ->capture_default_str();
  be->add_option("--topk", bp_topk)->capture_default_str();
  be->add_option("--repeats", bp.repeats)->capture_default_str();
  be->add_option("--seed", bp.seed)->capture_default_str();
  be->add_option("--workers", bp.workers)->capture_default_str();
  be->add_option("--out", bp_out, "Optional JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cnos::kExitOk : cnos::kExitConfig;
  }

  try {
    if (*vp) {
      const auto set = cnos::run_viewpoints(vp_level, vp_radius, vp_out);
      std::cout << "wrote " << set.size() << " viewpoints to " << vp_out << "\n";
    } else if (*match) {
      if (!config_path.empty()) {
        cnos::RunConfig from_file;
        cnos::apply_config_json(cnos::read_json_file(config_path), from_file);
        // Explicit flags win over the config file.
        if (!o_ref->count()) cfg.reference_path = from_file.reference_path;
        if (!o_manifest->count()) cfg.manifest_path = from_file.manifest_path;
        if (!o_props->count()) cfg.proposals_path = from_file.proposals_path;
        if (!o_masks->count()) cfg.masks_path = from_file.masks_path;
        if (!o_scene->count()) cfg.scene_id = from_file.scene_id;
        if (!o_image->count()) cfg.image_id = from_file.image_id;
        if (!o_thr->count()) cfg.report_threshold = from_file.report_threshold;
        if (!o_seed->count()) cfg.seed = from_file.seed;
        if (!o_workers->count()) cfg.workers = from_file.workers;
        if (!o_out->count()) cfg.output_path = from_file.output_path;
        if (!o_agg->count()) aggregation = cnos::to_string(from_file.aggregation);
        if (!o_topk->count()) topk = from_file.aggregation.k;
      }
      cfg.aggregation = cnos::parse_aggregation(aggregation, topk);
      const auto s = cnos::run_match(cfg);
      std::cout << "matched " << s.detections << " proposals over " << s.images
                << " images (" << s.reported << " above " << cfg.report_threshold
                << ", " << s.dropped_empty << " empty dropped) in "
                << s.timings.matching << " s matching -> " << cfg.output_path << "\n";
    } else if (*ev) {
      const auto report = cnos::run_eval(ev_dets, ev_ann, ev_out);
      std::cout << cnos::report_table(report);
    } else if (*sy) {
      const auto out = cnos::run_synth(sp, sp_out);
      std::cout << "wrote reference " << out.reference_path << ", manifest "
                << out.manifest_path << ", annotations " << out.annotations_path << "\n";
    } else if (*be) {
      bp.aggregation = cnos::parse_aggregation(bp_agg, bp_topk);
      const auto report = cnos::run_bench(bp);
      std::cout << cnos::bench_summary(report);
      if (!bp_out.empty()) cnos::write_json_file(bp_out, cnos::to_json(report));
    }
  } catch (const cnos::Error& e) {
    std::cerr << "error (" << e.kind() << "): " << e.what() << "\n";
    return cnos::exit_code_for(e);
  }
  return cnos::kExitOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
