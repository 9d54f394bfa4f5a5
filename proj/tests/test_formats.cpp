// Copyright 2026 The CoLLM Toolkit Authors
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

#include <filesystem>

#include "collm/checkpoint.hpp"
#include "collm/dataset.hpp"
#include "collm/synth.hpp"
#include "oracles.hpp"

using namespace collm;
namespace fs = std::filesystem;

namespace {

EmbeddingDataset small_dataset(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingDataset ds{"en", make_ptm("synthetic", dim), {}};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    ds.records.push_back({"utt" + std::to_string(i), static_cast<int>(i % 2), std::move(v)});
  }
  return ds;
}

Checkpoint small_checkpoint(const ArchitectureSpec& spec, std::uint64_t seed) {
  Network<float> net(spec);
  net.initialize(seed);
  return checkpoint_from_network(net, {"en", "hi"}, seed);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("collm_formats_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Decoding every proper prefix must raise ParseError at an offset inside it.
template <typename Decode>
void expect_every_truncation_fails(const Bytes& bytes, Decode decode) {
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    try {
      decode(std::span<const std::uint8_t>(bytes.data(), len));
      ADD_FAILURE() << "prefix of length " << len << " decoded";
      return;
    } catch (const ParseError& e) {
      ASSERT_LE(e.offset(), len);
    }
  }
}

}  // namespace

TEST(Aemb, RoundTripIsByteIdentical) {
  const auto dir = scratch("aemb");
  const auto ds = small_dataset(25, 12, 1);
  write_embeddings(ds, dir / "a.aemb");
  const auto back = read_embeddings(dir / "a.aemb");
  EXPECT_EQ(back, ds);
  write_embeddings(back, dir / "b.aemb");
  EXPECT_EQ(read_file(dir / "a.aemb"), read_file(dir / "b.aemb"));
  EXPECT_FALSE(fs::exists(dir / "a.aemb.tmp"));
}

TEST(Aemb, LayoutIsLittleEndianWithCanonicalHeader) {
  EmbeddingDataset ds{"en", make_ptm("synthetic", 1), {{"x", 1, {1.0f}}}};
  const Bytes b = encode_aemb(ds);
  const std::string header =
      R"({"count":1,"dim":1,"label_names":["non_abusive","abusive"],"language":"en","ptm":"synthetic"})";
  ASSERT_EQ(b.size(), 4 + 1 + 4 + header.size() + 2 + 1 + 1 + 4);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "AEMB");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], header.size());
  EXPECT_EQ(b[6], 0);
  EXPECT_EQ(std::string(b.begin() + 9, b.begin() + 9 + static_cast<std::ptrdiff_t>(header.size())), header);
  const std::size_t rec = 9 + header.size();
  EXPECT_EQ(b[rec], 1);
  EXPECT_EQ(b[rec + 1], 0);
  EXPECT_EQ(b[rec + 2], 'x');
  EXPECT_EQ(b[rec + 3], 1);
  // 1.0f = 0x3F800000
  EXPECT_EQ((std::vector<std::uint8_t>(b.end() - 4, b.end())), (std::vector<std::uint8_t>{0, 0, 0x80, 0x3F}));
}

TEST(Aemb, EveryTruncationIsParseError) {
  expect_every_truncation_fails(encode_aemb(small_dataset(6, 5, 2)),
                                [](auto bytes) { return decode_aemb(bytes); });
}

TEST(Aemb, RejectsBadInputs) {
  EmbeddingDataset zero{"en", {"synthetic", 0}, {}};
  EXPECT_THROW(encode_aemb(zero), DataError);

  // Hand-built header declaring dim 0.
  ByteWriter w;
  const std::string header =
      R"({"count":0,"dim":0,"label_names":["non_abusive","abusive"],"language":"en","ptm":"synthetic"})";
  w.raw("AEMB");
  w.u8(1);
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.raw(header);
  EXPECT_THROW(decode_aemb(w.take()), ParseError);

  auto dup = small_dataset(3, 4, 3);
  EXPECT_THROW(encode_aemb([&] { auto d = dup; d.records[2].id = d.records[0].id; return d; }()),
               DataError);
  // Same-length ids, so the third id can be overwritten in place.
  ASSERT_EQ(dup.records[2].id.size(), dup.records[0].id.size());
  auto dup_bytes = encode_aemb(dup);
  const std::string third = dup.records[2].id;
  const std::string text(dup_bytes.begin(), dup_bytes.end());
  const auto pos = text.rfind(third);
  ASSERT_NE(pos, std::string::npos);
  std::copy(dup.records[0].id.begin(), dup.records[0].id.end(), dup_bytes.begin() + pos);
  try {
    decode_aemb(dup_bytes);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
    EXPECT_GT(e.offset(), 0u);
  }

  auto bytes = encode_aemb(small_dataset(2, 4, 4));
  bytes[0] = 'X';
  EXPECT_THROW(decode_aemb(bytes), ParseError);
  bytes = encode_aemb(small_dataset(2, 4, 4));
  bytes[4] = 2;
  EXPECT_THROW(decode_aemb(bytes), ParseError);
  bytes = encode_aemb(small_dataset(2, 4, 4));
  bytes.push_back(0);
  EXPECT_THROW(decode_aemb(bytes), ParseError);
  // Known encoder with the wrong width.
  const std::string wh =
      R"({"count":0,"dim":4,"label_names":["non_abusive","abusive"],"language":"en","ptm":"whisper"})";
  ByteWriter w2;
  w2.raw("AEMB");
  w2.u8(1);
  w2.u32(static_cast<std::uint32_t>(wh.size()));
  w2.raw(wh);
  EXPECT_THROW(decode_aemb(w2.take()), ParseError);
  EXPECT_THROW(read_embeddings("/nonexistent/x.aemb"), DataError);
}

TEST(Aemb, FileErrorsNameThePath) {
  const auto dir = scratch("aemb_err");
  const auto bytes = encode_aemb(small_dataset(2, 4, 4));
  write_file_atomic(dir / "cut.aemb", std::span<const std::uint8_t>(bytes.data(), bytes.size() - 3));
  try {
    read_embeddings(dir / "cut.aemb");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("cut.aemb"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
}

TEST(Ackp, RoundTripIsByteIdentical) {
  const auto dir = scratch("ackp");
  for (const auto& spec : {build_cnn(32), build_transformer(32), build_linear(make_ptm("x", 7)),
                           build_fusion(make_ptm("a", 20), make_ptm("b", 16), BlockKind::conv)}) {
    const auto ckpt = small_checkpoint(spec, 3);
    save_checkpoint(ckpt, dir / "m.ackp");
    const auto back = load_checkpoint(dir / "m.ackp");
    EXPECT_EQ(back.spec, ckpt.spec);
    EXPECT_EQ(back.weights, ckpt.weights);
    EXPECT_EQ(back.languages, ckpt.languages);
    EXPECT_EQ(back.merge_count, 1u);
    EXPECT_EQ(back.seed, 3u);
    save_checkpoint(back, dir / "n.ackp");
    EXPECT_EQ(read_file(dir / "m.ackp"), read_file(dir / "n.ackp"));
    EXPECT_EQ(checkpoint_id(back), checkpoint_id(ckpt));
  }
}

TEST(Ackp, TensorsInNameOrder) {
  const auto bytes = encode_ackp(small_checkpoint(build_linear(make_ptm("x", 3)), 1));
  const std::string s(bytes.begin(), bytes.end());
  EXPECT_LT(s.find("head.00_dense.bias"), s.find("head.00_dense.weight"));
  EXPECT_NE(s.find(R"("arch_hash":")"), std::string::npos);
  EXPECT_NE(s.find(R"("languages":["en","hi"])"), std::string::npos);
}

TEST(Ackp, EveryTruncationIsParseError) {
  expect_every_truncation_fails(encode_ackp(small_checkpoint(build_linear(make_ptm("x", 4)), 1)),
                                [](auto bytes) { return decode_ackp(bytes); });
  // Larger model: sampled cut points including every byte of the header.
  const auto big = encode_ackp(small_checkpoint(build_transformer(16), 2));
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const std::size_t len = i < 200 ? static_cast<std::size_t>(i) * 7 : rng.below(big.size());
    if (len >= big.size()) continue;
    EXPECT_THROW(decode_ackp(std::span<const std::uint8_t>(big.data(), len)), ParseError) << len;
  }
}

TEST(Ackp, RejectsTamperedFiles) {
  const auto ckpt = small_checkpoint(build_linear(make_ptm("x", 4)), 1);
  auto bytes = encode_ackp(ckpt);
  const std::string hash = ckpt.arch_hash();
  std::string s(bytes.begin(), bytes.end());
  const auto at = s.find(hash);
  ASSERT_NE(at, std::string::npos);
  bytes[at] = bytes[at] == 'a' ? 'b' : 'a';
  EXPECT_THROW(decode_ackp(bytes), ParseError);

  bytes = encode_ackp(ckpt);
  bytes.push_back(7);
  EXPECT_THROW(decode_ackp(bytes), ParseError);

  auto bad = ckpt;
  bad.weights.erase("head.00_dense.bias");
  EXPECT_THROW(encode_ackp(bad), CompatibilityError);
  bad = ckpt;
  bad.languages.clear();
  EXPECT_THROW(encode_ackp(bad), DataError);
}

TEST(Manifest, RelativePathsAndSplitChecks) {
  const auto dir = scratch("manifest");
  fs::create_directories(dir / "data");
  auto train = small_dataset(10, 4, 1);
  auto test = small_dataset(4, 4, 2);
  for (auto& r : test.records) r.id = "t_" + r.id;
  write_embeddings(train, dir / "data/train.aemb");
  write_embeddings(test, dir / "data/test.aemb");
  write_manifest({"en", "data/train.aemb", "data/test.aemb"}, dir / "en.json");
  const auto m = read_manifest(dir / "en.json");
  EXPECT_EQ(m.train_path, dir / "data/train.aemb");
  const auto [tr, te] = load_split(m);
  EXPECT_EQ(tr, train);
  EXPECT_EQ(te, test);

  test.records[0].id = train.records[3].id;
  write_embeddings(test, dir / "data/test.aemb");
  EXPECT_THROW(load_split(m), DataError);

  write_manifest({"de", "data/train.aemb", "data/train.aemb"}, dir / "de.json");
  EXPECT_THROW(load_split(read_manifest(dir / "de.json")), DataError);
  write_file_atomic(dir / "broken.json", std::string_view("{\"language\": 3}"));
  EXPECT_THROW(read_manifest(dir / "broken.json"), DataError);
}

TEST(JoinForFusion, AlignsByIdAndRejectsMismatch) {
  auto a = small_dataset(6, 4, 1);
  auto b = small_dataset(6, 3, 2);
  b.ptm = make_ptm("other", 3);
  std::reverse(b.records.begin(), b.records.end());
  const auto joined = join_for_fusion(a, b);
  ASSERT_EQ(joined.records.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(joined.records[i].id, a.records[i].id);
    EXPECT_EQ(joined.records[i].first, a.records[i].vector);
    EXPECT_EQ(joined.records[i].second, b.records[5 - i].vector);
  }
  auto missing = b;
  missing.records.pop_back();
  EXPECT_THROW(join_for_fusion(a, missing), DataError);
  auto extra = b;
  extra.records.push_back({"new", 0, {0, 0, 0}});
  EXPECT_THROW(join_for_fusion(a, extra), DataError);
  auto flipped = b;
  flipped.records[0].label = 1 - flipped.records[0].label;
  EXPECT_THROW(join_for_fusion(a, flipped), DataError);
  auto lang = b;
  lang.language = "fr";
  EXPECT_THROW(join_for_fusion(a, lang), DataError);
}

TEST(StratifiedSplit, PerClassRoundedFraction) {
  std::vector<int> labels;
  for (int i = 0; i < 37; ++i) labels.push_back(0);
  for (int i = 0; i < 13; ++i) labels.push_back(1);
  Rng rng(1);
  const auto [kept, held] = stratified_split(labels, 0.1, rng);
  EXPECT_EQ(kept.size() + held.size(), 50u);
  std::size_t held1 = 0;
  for (auto i : held) held1 += static_cast<std::size_t>(labels[i]);
  EXPECT_EQ(held.size() - held1, 4u);  // round(3.7)
  EXPECT_EQ(held1, 1u);                // round(1.3)
  Rng again(1);
  EXPECT_EQ(stratified_split(labels, 0.1, again).second, held);
}
