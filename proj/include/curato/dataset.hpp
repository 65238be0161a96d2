// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "curato/dataset/csv.hpp"
#include "curato/dataset/fvec.hpp"
#include "curato/dataset/manifest.hpp"
#include "curato/dataset/synthetic.hpp"
#include "curato/dataset/types.hpp"
