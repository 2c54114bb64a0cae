// SPDX-License-Identifier: Apache-2.0
//
// hbalign - learned hierarchical beam alignment for mmWave arrays
// Copyright (C) 2026 hbalign contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
//
// Umbrella header: pulls in the whole library.

#pragma once

#include "hbalign/rng.hpp"
#include "hbalign/kvtext.hpp"
#include "hbalign/mat.hpp"
#include "hbalign/channel.hpp"
#include "hbalign/codebook.hpp"
#include "hbalign/sweep.hpp"
#include "hbalign/labels.hpp"
#include "hbalign/neural.hpp"
#include "hbalign/checkpoint.hpp"
#include "hbalign/hban.hpp"
#include "hbalign/hban_mimo.hpp"
#include "hbalign/variants.hpp"
#include "hbalign/baselines.hpp"
#include "hbalign/harness.hpp"
