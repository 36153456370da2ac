// Copyright 2026 The sir-engine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "sir/benchmark.hpp"
#include "sir/dataset.hpp"
#include "sir/detection.hpp"
#include "sir/embedding.hpp"
#include "sir/error.hpp"
#include "sir/features.hpp"
#include "sir/hog.hpp"
#include "sir/index.hpp"
#include "sir/localize.hpp"
#include "sir/metrics.hpp"
#include "sir/nn.hpp"
#include "sir/oetf.hpp"
#include "sir/pipeline.hpp"
#include "sir/pooling.hpp"
#include "sir/pq.hpp"
#include "sir/raster.hpp"
#include "sir/rng.hpp"
#include "sir/roi_align.hpp"
#include "sir/scene.hpp"
#include "sir/splice.hpp"
#include "sir/student.hpp"
#include "sir/tensor.hpp"
#include "sir/train.hpp"
#include "sir/whitening.hpp"
