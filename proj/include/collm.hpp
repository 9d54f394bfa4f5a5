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

#pragma once

// Umbrella header for the CoLLM toolkit.

#include "collm/arch.hpp"
#include "collm/binary_io.hpp"
#include "collm/checkpoint.hpp"
#include "collm/dataset.hpp"
#include "collm/errors.hpp"
#include "collm/layer_spec.hpp"
#include "collm/layers.hpp"
#include "collm/loss.hpp"
#include "collm/merge.hpp"
#include "collm/metrics.hpp"
#include "collm/network.hpp"
#include "collm/ops.hpp"
#include "collm/predict.hpp"
#include "collm/ptm.hpp"
#include "collm/radam.hpp"
#include "collm/rng.hpp"
#include "collm/sha256.hpp"
#include "collm/synth.hpp"
#include "collm/tensor.hpp"
#include "collm/train.hpp"
