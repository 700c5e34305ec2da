// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "moecache/cache_sim.hpp"
#include "moecache/metrics.hpp"
#include "moecache/trace.hpp"

namespace moecache {

struct Palette {
  std::string activated = "#1f4e9c";
  std::string cached = "#9e9e9e";
  std::string tp = "#7b3fa0";
  std::string fp = "#2f7fd8";
  std::string fn = "#d8342f";
  std::string bar = "#4c72b0";
  std::string grid = "#e6e6e6";
};

struct RenderSpec {
  int cell_px = 12;
  Palette palette;
};

// SVG marks carry a class attribute so they can be counted:
//   cache trace:  rect.activated (large), rect.cached (small)
//   speculation:  rect.tp, rect.fp, rect.fn, rect.fn-excluded (layer 0)
//   histogram:    rect.bar
// Display labels are 1-based ("layer 1" is layer index 0).

/// Token on the x axis, expert on the y axis. Throws SelectionError if the
/// layer was not simulated.
std::string render_cache_trace(const CacheEventLog& log, int layer, const RenderSpec& spec = {});

/// Expert on the x axis, layer on the y axis, for one token. Layer 0 has no
/// guess; when `activations` is given its experts are drawn in the fn colour
/// as excluded marks. Throws SelectionError if the token is absent.
std::string render_speculation(const SpeculationTrace& trace, int token,
                               const RenderSpec& spec = {},
                               const ActivationTrace* activations = nullptr);

std::string render_histogram(const ExpertHistogram& histogram, const RenderSpec& spec = {});

/// One row per expert, one column per token:
/// '#' activated and cached, 'A' activated only, '.' cached only, ' ' neither.
std::string render_cache_text(const CacheEventLog& log, int layer);

/// One row per layer, one column per expert: '+' tp, 'g' fp, 'x' fn.
std::string render_speculation_text(const SpeculationTrace& trace, int token,
                                    const ActivationTrace* activations = nullptr);

}  // namespace moecache
