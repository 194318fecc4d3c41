// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace tracescale::detail {

/// Source of the child-side Python harness (src/python/tracer.py).
std::string_view tracer_script();

}  // namespace tracescale::detail
