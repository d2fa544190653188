// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hyperflow/attention.hpp"
#include "hyperflow/bench.hpp"
#include "hyperflow/color.hpp"
#include "hyperflow/common.hpp"
#include "hyperflow/config.hpp"
#include "hyperflow/cube_io.hpp"
#include "hyperflow/encoder.hpp"
#include "hyperflow/image_io.hpp"
#include "hyperflow/kmeans.hpp"
#include "hyperflow/metrics.hpp"
#include "hyperflow/parallel.hpp"
#include "hyperflow/reconstruct.hpp"
#include "hyperflow/rng.hpp"
#include "hyperflow/scene.hpp"
#include "hyperflow/spectral.hpp"
#include "hyperflow/train.hpp"
#include "hyperflow/vos.hpp"
