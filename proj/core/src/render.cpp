// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "moecache/render.hpp"

#include <algorithm>
#include <string>

#include <fmt/format.h>

#include "moecache/error.hpp"

namespace moecache {

namespace {

constexpr int kMarginLeft = 56;
constexpr int kMarginTop = 32;
constexpr int kMarginRight = 16;
constexpr int kMarginBottom = 40;

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

class SvgWriter {
 public:
  SvgWriter(int width, int height) : width_(width), height_(height) {
    out_ = fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
        "viewBox=\"0 0 {0} {1}\">\n"
        "<rect class=\"background\" x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
        width, height);
  }

  void rect(std::string_view cls, double x, double y, double w, double h, std::string_view fill) {
    out_ += fmt::format(
        "<rect class=\"{}\" x=\"{:g}\" y=\"{:g}\" width=\"{:g}\" height=\"{:g}\" fill=\"{}\"/>\n",
        cls, x, y, w, h, xml_escape(fill));
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke) {
    out_ += fmt::format(
        "<line x1=\"{:g}\" y1=\"{:g}\" x2=\"{:g}\" y2=\"{:g}\" stroke=\"{}\" stroke-width=\"1\"/>\n",
        x1, y1, x2, y2, xml_escape(stroke));
  }

  void text(double x, double y, std::string_view content, std::string_view anchor = "start",
            int size = 11) {
    out_ += fmt::format(
        "<text x=\"{:g}\" y=\"{:g}\" font-family=\"sans-serif\" font-size=\"{}\" "
        "text-anchor=\"{}\">{}</text>\n",
        x, y, size, anchor, xml_escape(content));
  }

  std::string finish() && {
    out_ += "</svg>\n";
    return std::move(out_);
  }

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  int width_;
  int height_;
  std::string out_;
};

std::string ordinal(int n) {
  const int mod100 = n % 100;
  const char* suffix = "th";
  if (mod100 < 11 || mod100 > 13) {
    switch (n % 10) {
      case 1: suffix = "st"; break;
      case 2: suffix = "nd"; break;
      case 3: suffix = "rd"; break;
      default: break;
    }
  }
  return std::to_string(n) + suffix;
}

void check_cell(const RenderSpec& spec) {
  if (spec.cell_px < 1) throw ConfigError("cell_px must be positive");
}

// Horizontal grid lines between rows plus row labels on the left.
void draw_rows(SvgWriter& svg, int rows, int cols, int cell, const Palette& palette,
               auto&& label) {
  for (int r = 0; r <= rows; ++r) {
    const double y = kMarginTop + r * cell;
    svg.line(kMarginLeft, y, kMarginLeft + cols * cell, y, palette.grid);
  }
  for (int r = 0; r < rows; ++r) {
    svg.text(kMarginLeft - 6, kMarginTop + r * cell + cell * 0.75, label(r), "end", 10);
  }
}

}  // namespace

std::string render_cache_trace(const CacheEventLog& log, int layer, const RenderSpec& spec) {
  check_cell(spec);
  if (!log.has_layer(layer)) {
    throw SelectionError("layer " + std::to_string(layer) + " was not simulated");
  }
  const int cell = spec.cell_px;
  const int tokens = log.num_tokens;
  const int experts = log.shape.num_experts;
  SvgWriter svg(kMarginLeft + std::max(tokens, 1) * cell + kMarginRight,
                kMarginTop + experts * cell + kMarginBottom);

  svg.text(kMarginLeft, 18,
           fmt::format("{} layer - {} cache, size {}", ordinal(layer + 1),
                       to_string(log.config.policy), log.config.cache_size),
           "start", 12);
  draw_rows(svg, experts, tokens, cell, spec.palette,
            [](int r) { return "expert " + std::to_string(r); });

  const double large = cell - 2.0;
  const double small = std::max(1.0, cell * 0.4);
  for (const auto& s : log.steps) {
    if (s.layer != layer) continue;
    const double x0 = kMarginLeft + s.token * cell;
    for (ExpertId e : s.activated()) {
      svg.rect("activated", x0 + 1, kMarginTop + e * cell + 1, large, large,
               spec.palette.activated);
    }
    for (ExpertId e : s.cached()) {
      const double offset = (cell - small) / 2.0;
      svg.rect("cached", x0 + offset, kMarginTop + e * cell + offset, small, small,
               spec.palette.cached);
    }
  }

  const double axis_y = kMarginTop + experts * cell;
  for (int t = 0; t < tokens; t += 10) {
    svg.text(kMarginLeft + t * cell + cell / 2.0, axis_y + 14, std::to_string(t), "middle", 10);
  }
  svg.text(kMarginLeft + tokens * cell / 2.0, axis_y + 32, "token", "middle");
  return std::move(svg).finish();
}

std::string render_speculation(const SpeculationTrace& trace, int token, const RenderSpec& spec,
                               const ActivationTrace* activations) {
  check_cell(spec);
  if (token < 0 || token >= trace.num_tokens()) {
    throw SelectionError("token " + std::to_string(token) + " not present in speculation trace");
  }
  const int cell = spec.cell_px;
  const int layers = trace.shape().num_layers;
  const int experts = trace.shape().num_experts;
  SvgWriter svg(kMarginLeft + experts * cell + kMarginRight + 64,
                kMarginTop + layers * cell + kMarginBottom);

  svg.text(kMarginLeft, 18, fmt::format("Speculative expert loading, token {}", token), "start",
           12);
  draw_rows(svg, layers, experts, cell, spec.palette,
            [](int r) { return "layer " + std::to_string(r + 1); });

  const double size = cell - 2.0;
  auto mark = [&](std::string_view cls, int layer, ExpertId e, std::string_view fill) {
    svg.rect(cls, kMarginLeft + e * cell + 1, kMarginTop + layer * cell + 1, size, size, fill);
  };

  if (activations != nullptr && token < activations->num_tokens()) {
    for (ExpertId e : activations->activated(token, 0)) {
      mark("fn-excluded", 0, e, spec.palette.fn);
    }
  }
  svg.text(kMarginLeft + experts * cell + 6, kMarginTop + cell * 0.75, "excluded", "start", 10);

  for (int l = 1; l < layers; ++l) {
    const auto& r = trace.at(token, l);
    for (ExpertId e : set_intersection(r.guessed, r.actual)) mark("tp", l, e, spec.palette.tp);
    for (ExpertId e : set_difference(r.guessed, r.actual)) mark("fp", l, e, spec.palette.fp);
    for (ExpertId e : set_difference(r.actual, r.guessed)) mark("fn", l, e, spec.palette.fn);
  }

  const double axis_y = kMarginTop + layers * cell;
  for (int e = 0; e < experts; ++e) {
    svg.text(kMarginLeft + e * cell + cell / 2.0, axis_y + 14, std::to_string(e), "middle", 10);
  }
  svg.text(kMarginLeft + experts * cell / 2.0, axis_y + 32, "expert", "middle");
  return std::move(svg).finish();
}

std::string render_histogram(const ExpertHistogram& histogram, const RenderSpec& spec) {
  check_cell(spec);
  const int bar_w = spec.cell_px * 2;
  const int plot_h = 160;
  const int experts = static_cast<int>(histogram.counts.size());
  SvgWriter svg(kMarginLeft + experts * bar_w + kMarginRight, kMarginTop + plot_h + kMarginBottom);

  svg.text(kMarginLeft, 18,
           fmt::format("{} layer - activated experts (gini {:.3f})", ordinal(histogram.layer + 1),
                       histogram.gini),
           "start", 12);
  const double base_y = kMarginTop + plot_h;
  svg.line(kMarginLeft, base_y, kMarginLeft + experts * bar_w, base_y, "#000000");
  const double unit = histogram.max_count > 0 ? double(plot_h) / histogram.max_count : 0.0;
  for (int e = 0; e < experts; ++e) {
    const double h = unit * static_cast<double>(histogram.counts[static_cast<std::size_t>(e)]);
    svg.rect("bar", kMarginLeft + e * bar_w + 2, base_y - h, bar_w - 4, h, spec.palette.bar);
    svg.text(kMarginLeft + e * bar_w + bar_w / 2.0, base_y + 14, std::to_string(e), "middle", 10);
  }
  svg.text(kMarginLeft - 6, kMarginTop + 10, std::to_string(histogram.max_count), "end", 10);
  svg.text(kMarginLeft + experts * bar_w / 2.0, base_y + 32, "expert", "middle");
  return std::move(svg).finish();
}

std::string render_cache_text(const CacheEventLog& log, int layer) {
  if (!log.has_layer(layer)) {
    throw SelectionError("layer " + std::to_string(layer) + " was not simulated");
  }
  const auto tokens = static_cast<std::size_t>(log.num_tokens);
  std::vector<std::string> rows(static_cast<std::size_t>(log.shape.num_experts),
                                std::string(tokens, ' '));
  for (const auto& s : log.steps) {
    if (s.layer != layer) continue;
    const auto activated = s.activated();
    for (std::size_t e = 0; e < rows.size(); ++e) {
      const bool a = activated.contains(static_cast<ExpertId>(e));
      const bool c = s.cached().contains(static_cast<ExpertId>(e));
      rows[e][static_cast<std::size_t>(s.token)] = a && c ? '#' : a ? 'A' : c ? '.' : ' ';
    }
  }
  std::string out;
  for (const auto& r : rows) out += r + "\n";
  return out;
}

std::string render_speculation_text(const SpeculationTrace& trace, int token,
                                    const ActivationTrace* activations) {
  if (token < 0 || token >= trace.num_tokens()) {
    throw SelectionError("token " + std::to_string(token) + " not present in speculation trace");
  }
  const auto experts = static_cast<std::size_t>(trace.shape().num_experts);
  std::string out;
  std::string row(experts, ' ');
  if (activations != nullptr && token < activations->num_tokens()) {
    for (ExpertId e : activations->activated(token, 0)) row[static_cast<std::size_t>(e)] = 'x';
  }
  out += row + "\n";
  for (int l = 1; l < trace.shape().num_layers; ++l) {
    const auto& r = trace.at(token, l);
    row.assign(experts, ' ');
    for (ExpertId e : set_intersection(r.guessed, r.actual)) row[static_cast<std::size_t>(e)] = '+';
    for (ExpertId e : set_difference(r.guessed, r.actual)) row[static_cast<std::size_t>(e)] = 'g';
    for (ExpertId e : set_difference(r.actual, r.guessed)) row[static_cast<std::size_t>(e)] = 'x';
    out += row + "\n";
  }
  return out;
}

}  // namespace moecache
