// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "curato/pipeline/arch.hpp"
#include "curato/pipeline/config.hpp"
#include "curato/pipeline/report.hpp"
#include "curato/pipeline/run.hpp"
#include "curato/pipeline/sweep.hpp"
