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

#include "collm/arch.hpp"
#include "collm/network.hpp"
#include "gradcheck.hpp"

using namespace collm;

class LayerGradient : public ::testing::TestWithParam<gradcheck::LayerCase> {};

TEST_P(LayerGradient, MatchesCentralDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LT(gradcheck::layer_error(GetParam(), seed), 1e-6) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, LayerGradient, ::testing::ValuesIn(gradcheck::layer_cases()),
                         [](const auto& info) { return info.param.label; });

TEST(NetworkGradient, CnnAtDim64) {
  const auto arch = build_cnn(64);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LT(gradcheck::network_error(arch, seed), 1e-6) << "seed " << seed;
  }
}

TEST(NetworkGradient, TransformerAtDim64) {
  const auto arch = build_transformer(64);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LT(gradcheck::network_error(arch, seed), 1e-6) << "seed " << seed;
  }
}

TEST(NetworkGradient, FusionAndLinear) {
  const auto fusion = build_fusion(make_ptm("a", 32), make_ptm("b", 24), BlockKind::conv);
  const auto linear = build_linear(make_ptm("a", 10));
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    EXPECT_LT(gradcheck::network_error(fusion, seed), 1e-6);
    EXPECT_LT(gradcheck::network_error(linear, seed), 1e-6);
  }
}

namespace {

std::vector<double> final_bias_grad(Network<double>& net) {
  for (const auto& p : net.parameters()) {
    if (p.name == "head.08_dense.bias") return p.param->grad.values();
  }
  return {};
}

}  // namespace

TEST(NetworkGradient, FinalBiasIsMeanOfProbMinusOneHot) {
  Network<double> net(build_cnn(32));
  net.initialize(4);
  Rng rng(4);
  std::vector<Sample<double>> batch(3);
  for (std::size_t b = 0; b < 3; ++b) {
    batch[b].inputs = {oracle::random_tensor({32}, rng)};
    batch[b].label = b == 1 ? 1 : 0;
  }
  ForwardContext ctx;
  batch_gradients<double>(net, std::span<const Sample<double>>(batch), ctx);
  const auto grad = final_bias_grad(net);
  ASSERT_EQ(grad.size(), 2u);
  std::vector<double> want(2, 0.0);
  for (const auto& s : batch) {
    const auto p = net.predict_proba(std::span<const Tensor<double>>(s.inputs));
    for (std::size_t c = 0; c < 2; ++c) want[c] += (p[c] - (static_cast<int>(c) == s.label ? 1.0 : 0.0)) / 3.0;
  }
  for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(grad[c], want[c], 1e-12);
}

TEST(NetworkGradient, DuplicatedSampleContributesTwice) {
  Network<double> net(build_cnn(32));
  net.initialize(9);
  Rng rng(9);
  Sample<double> s{{oracle::random_tensor({32}, rng)}, 1};
  ForwardContext ctx;
  std::vector<Sample<double>> single{s}, doubled{s, s};
  batch_gradients<double>(net, std::span<const Sample<double>>(single), ctx);
  std::vector<std::vector<double>> one;
  for (const auto& p : net.parameters()) one.push_back(p.param->grad.values());
  batch_gradients<double>(net, std::span<const Sample<double>>(doubled), ctx);
  // Undo the 1/B averaging to compare summed contributions.
  std::size_t i = 0;
  for (const auto& p : net.parameters()) {
    for (std::size_t k = 0; k < one[i].size(); ++k) {
      ASSERT_NEAR(2.0 * p.param->grad[k], 2.0 * one[i][k], 1e-15 + 1e-12 * std::abs(one[i][k])) << p.name;
    }
    ++i;
  }
}

TEST(NetworkGradient, BackwardWithoutForwardIsUsageError) {
  Network<double> net(build_cnn(32));
  net.initialize(1);
  EXPECT_THROW(net.backward(Tensor<double>::vector({0.1, -0.1})), UsageError);
  auto layer = make_layer<double>(LayerSpec::dense(3, 2));
  EXPECT_THROW(layer->backward(Tensor<double>::vector({1.0, 1.0})), UsageError);
}
