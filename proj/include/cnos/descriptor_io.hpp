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

// Binary descriptor interchange ("CNOSDSC1"):
//
//   magic    8 bytes  "CNOSDSC1"
//   version  u32      1
//   rank     u32      2 (N_P, D) or 3 (N_O, N_V, D)
//   dims     rank x u32
//   payload  product(dims) x f32, last dimension contiguous
//
// All integers and floats are little-endian. Rank-3 files carry their object
// labels in a JSON sidecar `<file>.labels.json`.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "cnos/descriptor.hpp"
#include "cnos/error.hpp"
#include "json.hpp"

namespace cnos {

inline constexpr char kDescriptorMagic[8] = {'C', 'N', 'O', 'S',
                                             'D', 'S', 'C', '1'};
inline constexpr std::uint32_t kDescriptorVersion = 1;

// Contents of a descriptor file exactly as stored, before normalization.
struct DescriptorFile {
  std::vector<std::uint32_t> dims;
  std::vector<float> payload;
  std::vector<std::string> object_labels;  // rank 3 only
};

struct LoadedDescriptors {
  std::variant<ReferenceSet, ProposalDescriptors> tensor;
  // Rows whose normalization moved some component by more than 1e-3.
  std::size_t renormalized_rows = 0;
};

inline std::string labels_sidecar_path(const std::string& path) {
  return path + ".labels.json";
}

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) |
        (v >> 24);
  return v;
}

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  v = to_le(v);
  const char* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + 4);
}

inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return to_le(v);
}

inline void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  f.flush();
  if (!f) throw IoError("failed writing '" + path + "'");
}

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline void write_descriptor_file(const DescriptorFile& file,
                                  const std::string& path) {
  if (file.dims.size() != 2 && file.dims.size() != 3)
    throw InvalidArgument("descriptor tensor rank must be 2 or 3");
  std::uint64_t count = 1;
  for (auto d : file.dims) count *= d;
  if (count != file.payload.size())
    throw InvalidArgument("descriptor payload does not match dims");
  if (file.dims.size() == 3 && file.object_labels.size() != file.dims[0])
    throw InvalidArgument("object label count does not match N_O");

  std::vector<char> bytes(kDescriptorMagic, kDescriptorMagic + 8);
  detail::put_u32(bytes, kDescriptorVersion);
  detail::put_u32(bytes, static_cast<std::uint32_t>(file.dims.size()));
  for (auto d : file.dims) detail::put_u32(bytes, d);
  bytes.reserve(bytes.size() + file.payload.size() * 4);
  for (float x : file.payload) {
    std::uint32_t bits;
    std::memcpy(&bits, &x, 4);
    detail::put_u32(bytes, bits);
  }
  detail::write_file(path, bytes);

  if (file.dims.size() == 3) {
    nlohmann::json sidecar = {{"object_labels", file.object_labels}};
    const std::string text = sidecar.dump() + "\n";
    detail::write_file(labels_sidecar_path(path),
                       std::vector<char>(text.begin(), text.end()));
  }
}

inline DescriptorFile read_descriptor_file(const std::string& path) {
  const std::vector<char> bytes = detail::read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kDescriptorMagic, 8) != 0)
    throw FormatError("'" + path + "' is not a CNOSDSC1 descriptor file");
  const std::uint32_t version = detail::get_u32(bytes.data() + 8);
  if (version != kDescriptorVersion)
    throw FormatError("'" + path + "': unsupported descriptor version " +
                      std::to_string(version));
  const std::uint32_t rank = detail::get_u32(bytes.data() + 12);
  if (rank != 2 && rank != 3)
    throw FormatError("'" + path + "': unsupported rank " +
                      std::to_string(rank));
  const std::size_t header = 16 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < header)
    throw CorruptFile("'" + path + "': truncated header");

  DescriptorFile file;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    file.dims.push_back(detail::get_u32(bytes.data() + 16 + 4 * i));
    count *= file.dims.back();
  }
  if (bytes.size() - header != count * 4)
    throw CorruptFile("'" + path + "': payload is " +
                      std::to_string(bytes.size() - header) +
                      " bytes, dims declare " + std::to_string(count * 4));
  file.payload.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t bits = detail::get_u32(bytes.data() + header + 4 * i);
    std::memcpy(&file.payload[i], &bits, 4);
  }

  if (rank == 3) {
    const std::string side = labels_sidecar_path(path);
    std::ifstream f(side);
    if (!f) throw IoError("missing label sidecar '" + side + "'");
    try {
      file.object_labels =
          nlohmann::json::parse(f).at("object_labels").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed label sidecar '" + side + "': " + e.what());
    }
    if (file.object_labels.size() != file.dims[0])
      throw CorruptFile("'" + side + "' lists " +
                        std::to_string(file.object_labels.size()) +
                        " labels, descriptor file declares " +
                        std::to_string(file.dims[0]) + " objects");
  }
  return file;
}

inline void save_descriptors(const ReferenceSet& ref, const std::string& path) {
  ref.validate();
  write_descriptor_file(
      {{static_cast<std::uint32_t>(ref.n_objects()),
        static_cast<std::uint32_t>(ref.n_views),
        static_cast<std::uint32_t>(ref.dim)},
       ref.values,
       ref.object_labels},
      path);
}

inline void save_descriptors(const ProposalDescriptors& p,
                             const std::string& path) {
  if (p.dim == 0) throw InvalidArgument("proposal descriptors need dim >= 1");
  write_descriptor_file({{static_cast<std::uint32_t>(p.size()),
                          static_cast<std::uint32_t>(p.dim)},
                         p.values,
                         {}},
                        path);
}

// Reads a descriptor file and L2-normalizes every row.
inline LoadedDescriptors load_descriptors(const std::string& path) {
  DescriptorFile file = read_descriptor_file(path);
  LoadedDescriptors out;
  const std::size_t dim = file.dims.back();
  if (dim == 0) throw CorruptFile("'" + path + "': descriptor dim is zero");
  try {
    out.renormalized_rows = normalize_rows(file.payload, dim);
  } catch (const DegenerateDescriptor& e) {
    throw DegenerateDescriptor("'" + path + "': " + e.what());
  }
  if (file.dims.size() == 3) {
    ReferenceSet ref;
    ref.object_labels = std::move(file.object_labels);
    ref.n_views = file.dims[1];
    ref.dim = dim;
    ref.values = std::move(file.payload);
    try {
      ref.validate();
    } catch (const InvalidArgument& e) {
      throw FormatError("'" + path + "': " + e.what());
    }
    out.tensor = std::move(ref);
  } else {
    ProposalDescriptors p;
    p.dim = dim;
    p.values = std::move(file.payload);
    out.tensor = std::move(p);
  }
  return out;
}

inline ReferenceSet load_reference_set(const std::string& path,
                                       std::size_t* renormalized = nullptr) {
  LoadedDescriptors loaded = load_descriptors(path);
  if (!std::holds_alternative<ReferenceSet>(loaded.tensor))
    throw FormatError("'" + path + "' holds proposals, expected a rank-3 reference set");
  if (renormalized) *renormalized = loaded.renormalized_rows;
  return std::get<ReferenceSet>(std::move(loaded.tensor));
}

inline ProposalDescriptors load_proposals(const std::string& path,
                                          std::size_t* renormalized = nullptr) {
  LoadedDescriptors loaded = load_descriptors(path);
  if (!std::holds_alternative<ProposalDescriptors>(loaded.tensor))
    throw FormatError("'" + path + "' holds a reference set, expected rank-2 proposals");
  if (renormalized) *renormalized = loaded.renormalized_rows;
  return std::get<ProposalDescriptors>(std::move(loaded.tensor));
}

}  // namespace cnos
