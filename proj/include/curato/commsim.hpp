// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "curato/commsim/io.hpp"
#include "curato/commsim/sim.hpp"
