// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "optic/backend_types.hpp"
#include "optic/backends.hpp"
#include "optic/clients.hpp"
#include "optic/evaluation.hpp"
#include "optic/geometry.hpp"
#include "optic/http.hpp"
#include "optic/image.hpp"
#include "optic/marking.hpp"
#include "optic/mock_backends.hpp"
#include "optic/pipeline.hpp"
#include "optic/protocol.hpp"
#include "optic/result.hpp"
