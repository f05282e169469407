// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Umbrella header.

#pragma once

#include "lenctl/backend.hpp"
#include "lenctl/backend_uri.hpp"
#include "lenctl/bench.hpp"
#include "lenctl/decode.hpp"
#include "lenctl/error.hpp"
#include "lenctl/http_backend.hpp"
#include "lenctl/marker.hpp"
#include "lenctl/metrics.hpp"
#include "lenctl/mock_backend.hpp"
#include "lenctl/pipeline.hpp"
#include "lenctl/probes.hpp"
#include "lenctl/schedule.hpp"
#include "lenctl/segmenter.hpp"
#include "lenctl/sse.hpp"
#include "lenctl/templates.hpp"
#include "lenctl/unicode.hpp"
