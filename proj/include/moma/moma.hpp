// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "moma/channel.hpp"
#include "moma/codes.hpp"
#include "moma/emit.hpp"
#include "moma/harness.hpp"
#include "moma/metrics.hpp"
#include "moma/phy.hpp"
#include "moma/rng.hpp"
#include "moma/scenario.hpp"
#include "moma/version.hpp"
