// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "spikecast/autodiff.hpp"
#include "spikecast/config.hpp"
#include "spikecast/data.hpp"
#include "spikecast/decoder.hpp"
#include "spikecast/fasnn.hpp"
#include "spikecast/losses.hpp"
#include "spikecast/model.hpp"
#include "spikecast/rng.hpp"
#include "spikecast/scene.hpp"
#include "spikecast/student.hpp"
#include "spikecast/svg.hpp"
#include "spikecast/teacher.hpp"
#include "spikecast/tensor.hpp"
#include "spikecast/threads.hpp"
#include "spikecast/train.hpp"
