/* Copyright 2026 The fcse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "fcse/arch.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace fcse::arch {
namespace {

using fcse::testing::expect_error;

TEST(Architecture, SelectedModelFile) {
  const auto a = parse_architecture(kModel53);
  EXPECT_EQ(a.sample_rate_hz, 16000);
  EXPECT_EQ(a.spec, nn::model53_spec());
  EXPECT_EQ(nn::param_count(a.spec), 2266736u);
}

TEST(Architecture, ActivationsAndDefaults) {
  const auto a = parse_architecture("conv 8 2.5 relu\nconv 4 2.5\noutput 1\n");
  EXPECT_EQ(a.spec.frame_len, 320);
  ASSERT_EQ(a.spec.layers.size(), 7u);
  EXPECT_EQ(a.spec.layers[0].kernel_len, 40);
  EXPECT_EQ(a.spec.layers[2].kind, nn::LayerKind::kRelu);
  EXPECT_EQ(a.spec.layers[5].kind, nn::LayerKind::kPRelu);
  EXPECT_EQ(a.spec.layers[6].kernel_len, 16);
  EXPECT_EQ(parse_architecture("output 5\n").spec.layers.size(), 1u);
}

TEST(Architecture, Errors) {
  expect_error(ErrorKind::kFormat, [] { parse_architecture("conv 8 5\n"); });
  expect_error(ErrorKind::kFormat, [] { parse_architecture("conv 8 5 tanh\noutput 5\n"); });
  expect_error(ErrorKind::kFormat, [] { parse_architecture("dense 8\noutput 5\n"); });
  expect_error(ErrorKind::kFormat, [] { parse_architecture("output 5\nconv 8 5\n"); });
  expect_error(ErrorKind::kFormat, [] { parse_architecture("conv x 5\noutput 5\n"); });
  expect_error(ErrorKind::kSpec, [] { parse_architecture("conv 0 5\noutput 5\n"); });
}

TEST(Grid, OneLayerThreeWidths) {
  const auto g = parse_grid("depths = 1\nfilters = 50, 100, 200\nkernel_ms = 5\n");
  ASSERT_EQ(g.cells.size(), 3u);
  EXPECT_EQ(g.max_epochs, 30);
  EXPECT_EQ(g.patience, 5);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t f = static_cast<std::size_t>(g.cells[i].filters);
    // conv 1·f·80 + f, batchnorm 4f, PReLU f·320, output conv f·80 + 1
    EXPECT_EQ(nn::param_count(cell_spec(g, g.cells[i])), 80 * f + f + 4 * f + 320 * f + 80 * f + 1);
  }
  EXPECT_EQ(g.cells[1].id, "d1_f100_k5_prelu");
}

TEST(Grid, CartesianOrder) {
  const auto g = parse_grid("depths = 1, 3\nfilters = 8\nkernel_ms = 2.5, 5\n"
                            "activation = prelu, relu\noutput_kernel_ms = 1\n");
  ASSERT_EQ(g.cells.size(), 8u);
  EXPECT_EQ(g.cells[0].id, "d1_f8_k2.5_prelu");
  EXPECT_EQ(g.cells[1].id, "d1_f8_k2.5_relu");
  EXPECT_EQ(g.cells[7].id, "d3_f8_k5_relu");
  EXPECT_EQ(g.cells[7].output_kernel_ms, 1.0);
  EXPECT_EQ(cell_spec(g, g.cells[7]).layers.size(), 10u);
}

TEST(Grid, EmptyAndErrors) {
  EXPECT_TRUE(parse_grid("").cells.empty());
  EXPECT_TRUE(parse_grid("depths = 1\n").cells.empty());
  expect_error(ErrorKind::kFormat, [] { parse_grid("depth = 1\n"); });
  expect_error(ErrorKind::kFormat, [] { parse_grid("max_epochs = 1, 2\n"); });
  // Impossible cells are only rejected when their spec is built.
  const auto g = parse_grid("depths = 1\nfilters = 0\n");
  ASSERT_EQ(g.cells.size(), 1u);
  expect_error(ErrorKind::kSpec, [&] { cell_spec(g, g.cells[0]); });
}

}  // namespace
}  // namespace fcse::arch
