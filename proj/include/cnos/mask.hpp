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

// Binary masks: column-major run-length codec, bounding boxes, IoU and the
// square crop/scale/pad geometry applied to proposals before embedding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cnos/error.hpp"

namespace cnos {

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w) {
    if (h < 1 || w < 1)
      throw InvalidArgument("mask dimensions must be positive");
    bits.assign(static_cast<std::size_t>(h) * w, 0);
  }

  bool at(int row, int col) const {
    return bits[static_cast<std::size_t>(row) * width + col] != 0;
  }
  void set(int row, int col, bool value = true) {
    bits[static_cast<std::size_t>(row) * width + col] = value ? 1 : 0;
  }
  std::size_t area() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

// Uncompressed COCO-style RLE: alternating background/foreground run lengths
// over the column-major scan, starting with background.
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const Rle&, const Rle&) = default;
};

struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Geometry that maps a proposal's tight box onto a target x target square:
// the box is scaled by `scale` to content_w x content_h and placed at
// (pad_left, pad_top); the remaining margin is padding.
struct CropTransform {
  BBox source_box;
  int target = 224;
  double scale = 1.0;
  int content_w = 0;
  int content_h = 0;
  int pad_left = 0;
  int pad_top = 0;
};

inline Rle rle_encode(const BinaryMask& m) {
  Rle r{m.height, m.width, {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int col = 0; col < m.width; ++col) {
    for (int row = 0; row < m.height; ++row) {
      const std::uint8_t v = m.at(row, col) ? 1 : 0;
      if (v != current) {
        r.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  r.counts.push_back(run);
  return r;
}

inline void validate_rle(const Rle& r) {
  if (r.height < 1 || r.width < 1)
    throw CorruptRle("rle size must be positive, got " +
                     std::to_string(r.height) + "x" + std::to_string(r.width));
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    if (i > 0 && r.counts[i] == 0)
      throw CorruptRle("rle has a zero-length run at position " +
                       std::to_string(i));
    total += r.counts[i];
  }
  const std::uint64_t expected = static_cast<std::uint64_t>(r.height) * r.width;
  if (total != expected)
    throw CorruptRle("rle counts sum to " + std::to_string(total) +
                     ", expected " + std::to_string(expected));
}

inline BinaryMask rle_decode(const Rle& r) {
  validate_rle(r);
  BinaryMask m(r.height, r.width);
  std::uint64_t linear = 0;
  bool fg = false;
  for (std::uint32_t run : r.counts) {
    if (fg) {
      for (std::uint64_t k = linear; k < linear + run; ++k) {
        const int col = static_cast<int>(k / r.height);
        const int row = static_cast<int>(k % r.height);
        m.set(row, col);
      }
    }
    linear += run;
    fg = !fg;
  }
  return m;
}

inline std::uint64_t rle_area(const Rle& r) {
  std::uint64_t a = 0;
  for (std::size_t i = 1; i < r.counts.size(); i += 2) a += r.counts[i];
  return a;
}

inline BBox bbox_from_mask(const BinaryMask& m) {
  int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
  for (int row = 0; row < m.height; ++row)
    for (int col = 0; col < m.width; ++col)
      if (m.at(row, col)) {
        x0 = std::min(x0, col);
        x1 = std::max(x1, col);
        y0 = std::min(y0, row);
        y1 = std::max(y1, row);
      }
  if (x1 < 0) throw EmptyMask("mask has no foreground pixels");
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width)
    throw InvalidArgument("mask size mismatch: " + std::to_string(a.height) +
                          "x" + std::to_string(a.width) + " vs " +
                          std::to_string(b.height) + "x" +
                          std::to_string(b.width));
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] & b.bits[i]);
    uni += (a.bits[i] | b.bits[i]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// IoU straight from two run-length encodings, walking both run lists in
// lockstep without materializing the rasters.
inline double rle_iou(const Rle& a, const Rle& b) {
  if (a.height != b.height || a.width != b.width)
    throw InvalidArgument("rle size mismatch");
  std::uint64_t inter = 0;
  std::size_t ia = 0, ib = 0;
  std::uint64_t left_a = a.counts.empty() ? 0 : a.counts[0];
  std::uint64_t left_b = b.counts.empty() ? 0 : b.counts[0];
  const std::uint64_t total = static_cast<std::uint64_t>(a.height) * a.width;
  std::uint64_t pos = 0;
  while (pos < total) {
    while (left_a == 0 && ++ia < a.counts.size()) left_a = a.counts[ia];
    while (left_b == 0 && ++ib < b.counts.size()) left_b = b.counts[ib];
    if (left_a == 0 || left_b == 0) break;
    const std::uint64_t step = std::min(left_a, left_b);
    if ((ia % 2 == 1) && (ib % 2 == 1)) inter += step;
    left_a -= step;
    left_b -= step;
    pos += step;
  }
  const std::uint64_t uni = rle_area(a) + rle_area(b) - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline CropTransform crop_square_transform(const BBox& box, int image_w,
                                           int image_h, int target = 224) {
  if (target < 1) throw InvalidArgument("crop target must be positive");
  if (box.w < 1 || box.h < 1 || box.x < 0 || box.y < 0 ||
      box.x + box.w > image_w || box.y + box.h > image_h)
    throw InvalidArgument("crop box lies outside the image");
  CropTransform t;
  t.source_box = box;
  t.target = target;
  t.scale = static_cast<double>(target) / std::max(box.w, box.h);
  // std::round rounds half away from zero.
  t.content_w = std::min(target, static_cast<int>(std::round(box.w * t.scale)));
  t.content_h = std::min(target, static_cast<int>(std::round(box.h * t.scale)));
  t.pad_left = (target - t.content_w) / 2;
  t.pad_top = (target - t.content_h) / 2;
  return t;
}

}  // namespace cnos
