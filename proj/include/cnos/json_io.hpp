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

// JSON documents exchanged with the extraction tooling and BOP-style
// evaluation: RLE masks, per-image mask lists, detections, annotations,
// run manifests and AP reports.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <utility>
#include <sstream>
#include <string>
#include <vector>

#include "cnos/error.hpp"
#include "cnos/evaluator.hpp"
#include "cnos/mask.hpp"
#include "cnos/matcher.hpp"
#include "json.hpp"

namespace cnos {

using json = nlohmann::json;

struct DetectionRecord {
  int scene_id = 0;
  int image_id = 0;
  int category_id = 0;
  std::string object_label;
  double score = 0.0;
  BBox bbox;
  Rle segmentation;
  double time = -1.0;
};

struct ImageInfo {
  int scene_id = 0;
  int image_id = 0;
  int height = 0;
  int width = 0;
};

struct Annotations {
  std::vector<ImageInfo> images;
  std::vector<GroundTruthInstance> instances;
  std::vector<std::string> object_labels;  // optional explicit vocabulary
};

// One entry of a match manifest. Relative paths are resolved against the
// manifest's directory at load time.
struct ManifestEntry {
  int scene_id = 0;
  int image_id = 0;
  std::string descriptors;
  std::string masks;
  int height = 0;  // 0 when undeclared
  int width = 0;
  double time = -1.0;  // extractor-reported per-image time, if any
};

inline json to_json(const Rle& r) {
  return {{"size", {r.height, r.width}}, {"counts", r.counts}};
}

inline Rle rle_from_json(const json& j) {
  Rle r;
  try {
    const auto& size = j.at("size");
    if (!size.is_array() || size.size() != 2)
      throw FormatError("rle 'size' must be [H, W]");
    r.height = size[0].get<int>();
    r.width = size[1].get<int>();
    const auto& counts = j.at("counts");
    if (!counts.is_array())
      throw FormatError("rle 'counts' must be an uncompressed integer list");
    r.counts.reserve(counts.size());
    for (const auto& c : counts) {
      if (!c.is_number_integer() || c.get<long long>() < 0)
        throw CorruptRle("rle counts must be non-negative integers");
      r.counts.push_back(c.get<std::uint32_t>());
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed rle: ") + e.what());
  }
  validate_rle(r);
  return r;
}

inline json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw IoError("failed writing '" + path + "'");
}

inline void write_json_file(const std::string& path, const json& doc, int indent = 1) {
  write_text_file(path, doc.dump(indent) + "\n");
}

inline std::vector<Rle> read_masks_file(const std::string& path) {
  const json doc = read_json_file(path);
  if (!doc.is_array())
    throw FormatError("'" + path + "': masks file must be a JSON array");
  std::vector<Rle> masks;
  masks.reserve(doc.size());
  for (const auto& m : doc) {
    try {
      masks.push_back(rle_from_json(m));
    } catch (const Error& e) {
      throw FormatError("'" + path + "' mask " + std::to_string(masks.size()) +
                        ": " + e.what());
    }
  }
  return masks;
}

inline void write_masks_file(const std::string& path, std::span<const Rle> masks) {
  json doc = json::array();
  for (const auto& m : masks) doc.push_back(to_json(m));
  write_text_file(path, doc.dump() + "\n");
}

// Trailing digits of a label such as "obj_000012" give the BOP object id;
// labels without one fall back to their 1-based position in the reference.
inline int category_id_for(const std::string& label, std::size_t index) {
  std::size_t end = label.size(), begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(label[begin - 1])))
    --begin;
  if (begin < end && end - begin <= 9) return std::stoi(label.substr(begin));
  return static_cast<int>(index) + 1;
}

inline json to_json(const DetectionRecord& d) {
  return {{"scene_id", d.scene_id},
          {"image_id", d.image_id},
          {"category_id", d.category_id},
          {"object_label", d.object_label},
          {"score", d.score},
          {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
          {"segmentation", to_json(d.segmentation)},
          {"time", d.time}};
}

inline json detections_to_json(std::span<const DetectionRecord> dets) {
  json doc = json::array();
  for (const auto& d : dets) doc.push_back(to_json(d));
  return doc;
}

inline std::vector<EvalDetection> read_detections_file(const std::string& path) {
  const json doc = read_json_file(path);
  if (!doc.is_array())
    throw FormatError("'" + path + "': detections file must be a JSON array");
  std::vector<EvalDetection> out;
  out.reserve(doc.size());
  try {
    for (const auto& d : doc) {
      EvalDetection e;
      e.scene_id = d.at("scene_id").get<int>();
      e.image_id = d.at("image_id").get<int>();
      e.object_label = d.at("object_label").get<std::string>();
      e.score = d.at("score").get<double>();
      e.mask = rle_from_json(d.at("segmentation"));
      out.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "' detection " + std::to_string(out.size()) +
                      ": " + e.what());
  }
  return out;
}

inline Annotations read_annotations_file(const std::string& path) {
  const json doc = read_json_file(path);
  Annotations a;
  try {
    for (const auto& im : doc.at("images"))
      a.images.push_back({im.at("scene_id").get<int>(), im.at("image_id").get<int>(),
                          im.at("height").get<int>(), im.at("width").get<int>()});
    for (const auto& an : doc.at("annotations")) {
      GroundTruthInstance g;
      g.scene_id = an.at("scene_id").get<int>();
      g.image_id = an.at("image_id").get<int>();
      g.object_label = an.at("object_label").get<std::string>();
      g.mask = rle_from_json(an.at("segmentation"));
      g.ignore = an.value("ignore", false);
      a.instances.push_back(std::move(g));
    }
    if (doc.contains("object_labels"))
      a.object_labels = doc.at("object_labels").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': malformed annotations: " + e.what());
  }
  std::map<std::pair<int, int>, std::pair<int, int>> sizes;
  for (const auto& im : a.images)
    sizes[{im.scene_id, im.image_id}] = {im.height, im.width};
  for (const auto& g : a.instances) {
    const auto it = sizes.find({g.scene_id, g.image_id});
    if (it != sizes.end() && it->second != std::pair{g.mask.height, g.mask.width})
      throw ValidationError("'" + path +
                            "': annotation mask size does not match image " +
                            std::to_string(g.scene_id) + "/" +
                            std::to_string(g.image_id));
  }
  return a;
}

inline json to_json(const Annotations& a) {
  json images = json::array(), anns = json::array();
  for (const auto& im : a.images)
    images.push_back({{"scene_id", im.scene_id},
                      {"image_id", im.image_id},
                      {"height", im.height},
                      {"width", im.width}});
  for (const auto& g : a.instances)
    anns.push_back({{"scene_id", g.scene_id},
                    {"image_id", g.image_id},
                    {"object_label", g.object_label},
                    {"segmentation", to_json(g.mask)},
                    {"ignore", g.ignore}});
  json doc = {{"images", images}, {"annotations", anns}};
  if (!a.object_labels.empty()) doc["object_labels"] = a.object_labels;
  return doc;
}

inline std::vector<ManifestEntry> read_manifest_file(const std::string& path) {
  const json doc = read_json_file(path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::vector<ManifestEntry> out;
  try {
    const json& images = doc.is_array() ? doc : doc.at("images");
    for (const auto& e : images) {
      ManifestEntry m;
      m.scene_id = e.at("scene_id").get<int>();
      m.image_id = e.at("image_id").get<int>();
      m.descriptors = resolve(e.at("descriptors").get<std::string>());
      m.masks = resolve(e.at("masks").get<std::string>());
      m.height = e.value("height", 0);
      m.width = e.value("width", 0);
      m.time = e.value("time", -1.0);
      out.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "': malformed manifest: " + e.what());
  }
  return out;
}

inline json manifest_to_json(std::span<const ManifestEntry> entries) {
  json images = json::array();
  for (const auto& m : entries) {
    json e = {{"scene_id", m.scene_id},
              {"image_id", m.image_id},
              {"descriptors", m.descriptors},
              {"masks", m.masks}};
    if (m.height > 0) e["height"] = m.height;
    if (m.width > 0) e["width"] = m.width;
    if (m.time >= 0.0) e["time"] = m.time;
    images.push_back(std::move(e));
  }
  return {{"images", images}};
}

inline std::string threshold_key(double t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

inline json to_json(const ApReport& r) {
  json per_threshold = json::object();
  for (std::size_t i = 0; i < r.thresholds.size(); ++i)
    per_threshold[threshold_key(r.thresholds[i])] = r.per_threshold[i];
  json per_object = json::object();
  for (const auto& [label, ap] : r.per_object) per_object[label] = ap;
  return {{"mean_ap", r.mean_ap},
          {"per_threshold", per_threshold},
          {"per_object", per_object},
          {"counts",
           {{"detections", r.counts.detections},
            {"ground_truths", r.counts.ground_truths},
            {"ignored_ground_truths", r.counts.ignored_ground_truths},
            {"objects_evaluated", r.counts.objects_evaluated}}}};
}

inline std::string report_table(const ApReport& r) {
  std::ostringstream out;
  char line[128];
  out << "IoU     AP\n";
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.2f    %.4f\n", r.thresholds[i],
                  r.per_threshold[i]);
    out << line;
  }
  std::snprintf(line, sizeof(line), "mean    %.4f\n\n", r.mean_ap);
  out << line;
  out << "object            AP\n";
  for (const auto& [label, ap] : r.per_object) {
    std::snprintf(line, sizeof(line), "%-16s  %.4f\n", label.c_str(), ap);
    out << line;
  }
  std::snprintf(line, sizeof(line),
                "\ndetections %zu, ground truths %zu (+%zu ignored), objects %zu\n",
                r.counts.detections, r.counts.ground_truths,
                r.counts.ignored_ground_truths, r.counts.objects_evaluated);
  out << line;
  return out.str();
}

}  // namespace cnos
