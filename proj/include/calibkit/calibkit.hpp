// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "calibkit/calibrators.hpp"
#include "calibkit/errors.hpp"
#include "calibkit/matrix.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/random.hpp"
#include "calibkit/report.hpp"
#include "calibkit/synth.hpp"
#include "calibkit/tensor_io.hpp"
#include "calibkit/types.hpp"
#include "calibkit/zeroshot.hpp"
