// Copyright 2026 The jsdseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// plot: RD curves (mIoU over bpp) from sweep tables to a standalone SVG.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <sstream>

#include "common.h"
#include "jsdseg/errors.h"
#include "jsdseg/sweep.h"
#include "jsdseg/training.h"

namespace jsd::cli {

namespace {

struct Series {
  std::string name;
  std::vector<RdPoint> points;
};

// 1, 2 or 5 times a power of ten, about `target` steps across [lo, hi].
double TickStep(double lo, double hi, int target) {
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10 * mag;
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::fabs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Render(const std::vector<Series>& series, const std::string& title) {
  const double W = 640, H = 440, left = 70, right = 20, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      x0 = std::min(x0, p.bpp), x1 = std::max(x1, p.bpp);
      y0 = std::min(y0, p.miou), y1 = std::max(y1, p.miou);
    }
  }
  // Pad the ranges; a single point still gets a visible box.
  const double dx = std::max(x1 - x0, 1e-3), dy = std::max(y1 - y0, 1e-3);
  x0 = std::max(0.0, x0 - 0.08 * dx), x1 += 0.08 * dx;
  y0 -= 0.1 * dy, y1 = std::min(1.0, y1 + 0.1 * dy);
  if (y1 <= y0) y1 = y0 + 1e-3;
  auto X = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto Y = [&](double v) { return top + (1 - (v - y0) / (y1 - y0)) * ph; };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << Escape(title)
    << "</text>\n";

  const double xs = TickStep(x0, x1, 6), ys = TickStep(y0, y1, 6);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-12; t += xs) {
    o << "<line x1=\"" << X(t) << "\" y1=\"" << top << "\" x2=\"" << X(t) << "\" y2=\"" << top + ph
      << "\" stroke=\"#e0e0e0\"/>\n"
      << "<text x=\"" << X(t) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << Num(t)
      << "</text>\n";
  }
  for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-12; t += ys) {
    o << "<line x1=\"" << left << "\" y1=\"" << Y(t) << "\" x2=\"" << left + pw << "\" y2=\"" << Y(t)
      << "\" stroke=\"#e0e0e0\"/>\n"
      << "<text x=\"" << left - 6 << "\" y=\"" << Y(t) + 4 << "\" text-anchor=\"end\">" << Num(t) << "</text>\n";
  }
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n"
    << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">rate [bpp]</text>\n"
    << "<text transform=\"translate(18," << top + ph / 2
    << ") rotate(-90)\" text-anchor=\"middle\">mIoU</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    const auto front = ParetoFrontier(s.points);
    o << "<g stroke=\"" << color << "\" fill=\"" << color << "\">\n";
    if (front.size() > 1) {
      o << "<polyline fill=\"none\" stroke-width=\"2\" points=\"";
      for (const auto& p : front) o << X(p.bpp) << "," << Y(p.miou) << " ";
      o << "\"/>\n";
    }
    for (const auto& p : s.points) {
      const bool on_front = std::any_of(front.begin(), front.end(), [&](const RdPoint& f) {
        return f.bpp == p.bpp && f.miou == p.miou;
      });
      o << "<circle cx=\"" << X(p.bpp) << "\" cy=\"" << Y(p.miou) << "\" r=\"4\""
        << (on_front ? "" : " fill=\"white\"") << "/>\n"
        << "<text x=\"" << X(p.bpp) + 6 << "\" y=\"" << Y(p.miou) - 6
        << "\" stroke=\"none\" font-size=\"10\">&#945;=" << Num(p.alpha) << "</text>\n";
    }
    const double ly = top + 16 + 18 * double(i);
    o << "<line x1=\"" << left + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + 36 << "\" y2=\"" << ly
      << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << left + 42 << "\" y=\"" << ly + 4 << "\" stroke=\"none\" fill=\"black\">"
      << Escape(s.name) << "</text>\n</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace

void AddPlot(CLI::App& app) {
  struct Opts {
    std::vector<std::string> tables;
    std::string out = "rd.svg";
    std::string title = "Rate-distortion";
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("plot", "render RD curves from sweep tables to SVG");
  cmd->add_option("tables", o->tables, "RD tables written by sweep")->required();
  cmd->add_option("--out,-o", o->out, "SVG path")->capture_default_str();
  cmd->add_option("--title", o->title, "plot title")->capture_default_str();
  cmd->callback([o] {
    // One curve per (table, K, F, dilations) group.
    std::vector<Series> series;
    std::map<std::string, size_t> index;
    for (const auto& path : o->tables) {
      const auto rows = ParseRdTable(ReadFileText(path));
      if (rows.empty()) throw DataError(path + ": no rows");
      for (const auto& r : rows) {
        std::string d;
        for (size_t i = 0; i < r.dilations.size(); ++i) d += (i ? "/" : "") + std::to_string(r.dilations[i]);
        std::string name = "K=" + std::to_string(r.k) + " F=" + std::to_string(r.feature_maps) + " d=" + d;
        if (o->tables.size() > 1) name = std::filesystem::path(path).stem().string() + " " + name;
        auto [it, fresh] = index.emplace(name, series.size());
        if (fresh) series.push_back({name, {}});
        series[it->second].points.push_back({r.alpha, r.bpp, r.miou});
      }
    }
    WriteFileText(o->out, Render(series, o->title));
    std::printf("wrote %s (%zu curves)\n", o->out.c_str(), series.size());
  });
}

}  // namespace jsd::cli
