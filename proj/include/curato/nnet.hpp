// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "curato/nnet/checkpoint.hpp"
#include "curato/nnet/layers.hpp"
#include "curato/nnet/model.hpp"
#include "curato/nnet/tensor.hpp"
#include "curato/nnet/train.hpp"
