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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "cnos/descriptor.hpp"
#include "cnos/descriptor_io.hpp"
#include "cnos/synth.hpp"
#include "oracles.hpp"

namespace cnos {
namespace {

std::vector<float> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

TEST(L2Normalize, ThreeFourFive) {
  const auto v = l2_normalize(std::vector<float>{3.0f, 4.0f});
  EXPECT_NEAR(v[0], 0.6, 1e-7);
  EXPECT_NEAR(v[1], 0.8, 1e-7);
}

TEST(L2Normalize, ZeroVectorIsDegenerate) {
  EXPECT_THROW(l2_normalize(std::vector<float>(16, 0.0f)), DegenerateDescriptor);
  EXPECT_THROW(l2_normalize(std::vector<float>{}), InvalidArgument);
}

TEST(L2Normalize, UnitVectorIsFixedPoint) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto u = l2_normalize(random_vector(rng, 1 + trial * 13));
    EXPECT_NEAR(norm_of(u), 1.0, 1e-6);
    const auto again = l2_normalize(u);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(again[i], u[i], 1e-6);
  }
}

TEST(CosineSimilarity, IdentityOrthogonalAntipodal) {
  const std::vector<float> e0{1, 0, 0}, e1{0, 1, 0}, neg{-1, 0, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(e0, e0), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(e0, e1), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(e0, neg), -1.0);
}

TEST(CosineSimilarity, DimensionMismatch) {
  EXPECT_THROW(cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{1, 0, 0}),
               InvalidArgument);
}

TEST(CosineSimilarity, SymmetricBoundedAndMatchesOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng() % 300;
    const auto a = l2_normalize(random_vector(rng, d));
    const auto b = l2_normalize(random_vector(rng, d));
    const double ab = cosine_similarity(a, b);
    EXPECT_EQ(ab, cosine_similarity(b, a));
    EXPECT_LE(std::abs(ab), 1.0);
    EXPECT_NEAR(ab, oracle::naive_cosine(a, b), 1e-6);
  }
}

TEST(CosineSimilarity, ScaleInvariance) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto raw = random_vector(rng, 256);
    const auto b = l2_normalize(random_vector(rng, 256));
    const double base = cosine_similarity(l2_normalize(raw), b);
    for (float c : {1e-3f, 0.5f, 7.0f, 1e3f}) {
      std::vector<float> scaled(raw);
      for (auto& x : scaled) x *= c;
      EXPECT_NEAR(cosine_similarity(l2_normalize(scaled), b), base, 1e-6);
    }
  }
}

TEST(NormalizeRows, ReportsRowsThatMoved) {
  std::vector<float> data{1, 0, 0, 3, 4, 0};
  EXPECT_EQ(normalize_rows(data, 3), 1u);
  EXPECT_FLOAT_EQ(data[3], 0.6f);
}

class DescriptorFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("cnos_desc_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static ReferenceSet small_reference() {
    ReferenceSet r;
    r.object_labels = {"obj_000001", "obj_000002"};
    r.n_views = 3;
    r.dim = 4;
    for (int i = 0; i < 24; ++i) r.values.push_back(0.25f * static_cast<float>(i + 1) - 3.1f);
    return r;
  }

  std::filesystem::path dir_;
};

TEST_F(DescriptorFiles, RawRoundTripIsBitIdentical) {
  const ReferenceSet r = small_reference();
  save_descriptors(r, path("ref.cnosdsc"));
  const DescriptorFile f = read_descriptor_file(path("ref.cnosdsc"));
  EXPECT_EQ(f.dims, (std::vector<std::uint32_t>{2, 3, 4}));
  EXPECT_EQ(f.object_labels, r.object_labels);
  ASSERT_EQ(f.payload.size(), r.values.size());
  EXPECT_EQ(std::memcmp(f.payload.data(), r.values.data(), r.values.size() * 4), 0);
  EXPECT_EQ(std::filesystem::file_size(path("ref.cnosdsc")), 16u + 12u + 24u * 4u);
}

TEST_F(DescriptorFiles, HeaderLayoutIsLittleEndian) {
  ProposalDescriptors p{2, {1.0f, 0.0f}};
  save_descriptors(p, path("p.cnosdsc"));
  std::ifstream f(path("p.cnosdsc"), std::ios::binary);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(f)), {});
  ASSERT_EQ(b.size(), 32u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 8), "CNOSDSC1");
  EXPECT_EQ(b[8], 1);   // version
  EXPECT_EQ(b[12], 2);  // rank
  EXPECT_EQ(b[16], 1);  // N_P
  EXPECT_EQ(b[20], 2);  // D
  // 1.0f = 0x3f800000, little-endian
  EXPECT_EQ(b[24], 0x00);
  EXPECT_EQ(b[27], 0x3f);
}

TEST_F(DescriptorFiles, LoadNormalizesAndFlagsRows) {
  save_descriptors(small_reference(), path("ref.cnosdsc"));
  const LoadedDescriptors loaded = load_descriptors(path("ref.cnosdsc"));
  ASSERT_TRUE(std::holds_alternative<ReferenceSet>(loaded.tensor));
  const auto& ref = std::get<ReferenceSet>(loaded.tensor);
  EXPECT_EQ(loaded.renormalized_rows, 6u);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t v = 0; v < 3; ++v) EXPECT_NEAR(norm_of(ref.row(o, v)), 1.0, 1e-5);
}

TEST_F(DescriptorFiles, UnitRowsLoadWithoutWarning) {
  const SyntheticReference s = synth_reference_set(3, 5, 64, 1, 0.05);
  save_descriptors(s.reference, path("ref.cnosdsc"));
  std::size_t renorm = 99;
  const ReferenceSet r = load_reference_set(path("ref.cnosdsc"), &renorm);
  EXPECT_EQ(renorm, 0u);
  EXPECT_EQ(r.object_labels, s.reference.object_labels);
}

TEST_F(DescriptorFiles, EmptyProposalFile) {
  save_descriptors(ProposalDescriptors{128, {}}, path("empty.cnosdsc"));
  const ProposalDescriptors p = load_proposals(path("empty.cnosdsc"));
  EXPECT_EQ(p.size(), 0u);
  EXPECT_EQ(p.dim, 128u);
}

TEST_F(DescriptorFiles, TruncatedFileIsCorrupt) {
  save_descriptors(small_reference(), path("ref.cnosdsc"));
  std::filesystem::resize_file(path("ref.cnosdsc"),
                               std::filesystem::file_size(path("ref.cnosdsc")) - 1);
  EXPECT_THROW(read_descriptor_file(path("ref.cnosdsc")), CorruptFile);
}

TEST_F(DescriptorFiles, BadMagicAndVersionAreFormatErrors) {
  save_descriptors(ProposalDescriptors{2, {1.0f, 0.0f}}, path("p.cnosdsc"));
  {
    std::fstream f(path("p.cnosdsc"), std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXXXXXX", 8);
  }
  EXPECT_THROW(read_descriptor_file(path("p.cnosdsc")), FormatError);

  save_descriptors(ProposalDescriptors{2, {1.0f, 0.0f}}, path("v.cnosdsc"));
  {
    std::fstream f(path("v.cnosdsc"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const char two[4] = {2, 0, 0, 0};
    f.write(two, 4);
  }
  EXPECT_THROW(read_descriptor_file(path("v.cnosdsc")), FormatError);
}

TEST_F(DescriptorFiles, SidecarProblems) {
  save_descriptors(small_reference(), path("ref.cnosdsc"));
  std::filesystem::remove(path("ref.cnosdsc.labels.json"));
  EXPECT_THROW(read_descriptor_file(path("ref.cnosdsc")), IoError);

  save_descriptors(small_reference(), path("ref2.cnosdsc"));
  std::ofstream(path("ref2.cnosdsc.labels.json")) << R"({"object_labels": ["a"]})";
  EXPECT_THROW(read_descriptor_file(path("ref2.cnosdsc")), CorruptFile);

  save_descriptors(small_reference(), path("ref3.cnosdsc"));
  std::ofstream(path("ref3.cnosdsc.labels.json")) << R"({"object_labels": ["a", "a"]})";
  EXPECT_THROW(load_descriptors(path("ref3.cnosdsc")), FormatError);
}

TEST_F(DescriptorFiles, ZeroRowIsDegenerate) {
  save_descriptors(ProposalDescriptors{2, {1.0f, 0.0f, 0.0f, 0.0f}}, path("z.cnosdsc"));
  EXPECT_THROW(load_proposals(path("z.cnosdsc")), DegenerateDescriptor);
}

TEST_F(DescriptorFiles, WrongRankForTypedLoader) {
  save_descriptors(ProposalDescriptors{2, {1.0f, 0.0f}}, path("p.cnosdsc"));
  EXPECT_THROW(load_reference_set(path("p.cnosdsc")), FormatError);
  save_descriptors(small_reference(), path("r.cnosdsc"));
  EXPECT_THROW(load_proposals(path("r.cnosdsc")), FormatError);
}

TEST(Synthetic, ShapeContract) {
  const SyntheticReference s = synth_reference_set(10, 42, 1024, 3, 0.05);
  EXPECT_EQ(s.reference.n_objects(), 10u);
  EXPECT_EQ(s.reference.n_views, 42u);
  EXPECT_EQ(s.reference.dim, 1024u);
  EXPECT_EQ(s.reference.values.size(), 10u * 42u * 1024u);
  EXPECT_EQ(s.reference.object_labels.front(), "obj_000001");
  EXPECT_EQ(s.reference.object_labels.back(), "obj_000010");
  s.reference.validate();
  for (std::size_t o = 0; o < 10; ++o)
    for (std::size_t v = 0; v < 42; ++v)
      EXPECT_NEAR(norm_of(s.reference.row(o, v)), 1.0, 1e-5);
}

TEST(Synthetic, ZeroNoiseProposalsEqualPrototypes) {
  const SyntheticReference s = synth_reference_set(4, 6, 32, 5, 0.2);
  const std::vector<std::size_t> assign{0, 3, 1, 1};
  const ProposalDescriptors p = synth_proposals(s, assign, 0.0, 9);
  ASSERT_EQ(p.size(), 4u);
  for (std::size_t i = 0; i < assign.size(); ++i) {
    const auto row = p.row(i);
    const auto proto = s.prototype(assign[i]);
    EXPECT_TRUE(std::equal(row.begin(), row.end(), proto.begin()));
    EXPECT_NEAR(cosine_similarity(row, proto), 1.0, 1e-6);
  }
}

TEST(Synthetic, SeedDeterminism) {
  const auto a = synth_reference_set(3, 4, 16, 42, 0.3);
  const auto b = synth_reference_set(3, 4, 16, 42, 0.3);
  const auto c = synth_reference_set(3, 4, 16, 43, 0.3);
  EXPECT_EQ(a.reference.values, b.reference.values);
  EXPECT_NE(a.reference.values, c.reference.values);
  const std::vector<std::size_t> assign{2, 0};
  EXPECT_EQ(synth_proposals(a, assign, 0.1, 8).values,
            synth_proposals(b, assign, 0.1, 8).values);
}

TEST(Synthetic, InvalidArguments) {
  const auto s = synth_reference_set(2, 2, 8, 1, 0.0);
  const std::vector<std::size_t> bad{0, 2};
  EXPECT_THROW(synth_proposals(s, bad, 0.0, 1), InvalidArgument);
  EXPECT_THROW(synth_reference_set(0, 2, 8, 1, 0.0), InvalidArgument);
  EXPECT_THROW(synth_reference_set(1, 2, 8, 1, -0.1), InvalidArgument);
}

}  // namespace
}  // namespace cnos
