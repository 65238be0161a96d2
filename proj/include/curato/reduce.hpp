// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "curato/reduce/io.hpp"
#include "curato/reduce/pca.hpp"
#include "curato/reduce/tsne.hpp"
