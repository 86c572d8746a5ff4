// Copyright 2026 The vinp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "vinp/analysis.hpp"
#include "vinp/distance.hpp"
#include "vinp/features.hpp"
#include "vinp/init.hpp"
#include "vinp/io.hpp"
#include "vinp/motion.hpp"
#include "vinp/patchmatch.hpp"
#include "vinp/pipeline.hpp"
#include "vinp/pyramid.hpp"
#include "vinp/reconstruct.hpp"
#include "vinp/volume.hpp"

namespace vinp {
inline constexpr const char* kVersion = "0.1.0";
}
