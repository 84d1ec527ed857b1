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
#pragma once

#include "fcse/arch.hpp"
#include "fcse/audio_io.hpp"
#include "fcse/conv.hpp"
#include "fcse/dsp.hpp"
#include "fcse/error.hpp"
#include "fcse/evaluate.hpp"
#include "fcse/fft.hpp"
#include "fcse/metrics.hpp"
#include "fcse/nn.hpp"
#include "fcse/pipeline.hpp"
#include "fcse/synth.hpp"
#include "fcse/train.hpp"
