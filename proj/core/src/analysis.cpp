// Copyright 2026 The LKD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lkd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lkd/error.hpp"
#include "lkd/image_io.hpp"
#include "lkd/rng.hpp"
#include "lkd/tensor_io.hpp"

namespace lkd {

namespace {

void require_positive(Index v, const char* what) {
  if (v <= 0) throw ValidationError(std::string(what) + " must be positive");
}

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

}  // namespace

Index eval_eq3(Index K, Index d, Index C) {
  require_positive(K, "K");
  require_positive(d, "d");
  require_positive(C, "C");
  const Index kd = ceil_div(K, d);
  const Index ks = 2 * d - 1;
  return C * (kd * kd * C + ks * ks);
}

Index eval_eq4(Index K, Index d, Index C, Index H, Index W) {
  require_positive(H, "H");
  require_positive(W, "W");
  return eval_eq3(K, d, C) * H * W;
}

Index decomposed_count(Index K, Index d, Index C) {
  require_positive(K, "K");
  require_positive(d, "d");
  require_positive(C, "C");
  const Index kd = ceil_div(K, d);
  const Index ks = 2 * d - 1;
  return C * (kd * kd + ks * ks + C);
}

Index direct_dw_count(Index K, Index C) {
  require_positive(K, "K");
  require_positive(C, "C");
  return C * K * K;
}

FormulaReport formula_report(Index K, Index d, Index C, Index H, Index W) {
  FormulaReport r;
  r.K = K;
  r.d = d;
  r.C = C;
  r.H = H;
  r.W = W;
  r.eq3 = eval_eq3(K, d, C);
  r.eq4 = eval_eq4(K, d, C, H, W);
  r.decomposed = decomposed_count(K, d, C);
  r.legs = r.decomposed - C * C;
  r.direct = direct_dw_count(K, C);
  BlockOptions opt;
  opt.decomposition = {K, d};
  Rng rng(0);
  const Dlkcb<double> block("dlkcb", C, opt, rng);
  std::vector<LayerCost> rows;
  block.costs(rows, 1, 1);
  for (const auto& row : rows) r.dlkcb_branch += row.params;
  return r;
}

std::string FormulaReport::text() const {
  const Index kd = ceil_div(K, d), ks = 2 * d - 1;
  std::ostringstream os;
  os << "K=" << K << " d=" << d << " C=" << C << " (legs " << ks << "x" << ks << " + " << kd << "x" << kd
     << " dilation " << d << ")\n";
  os << "eq3 P(K,d) = C*(ceil(K/d)^2*C + (2d-1)^2) = " << eq3 << "\n";
  os << "eq4 F(K,d) = P*H*W at " << H << "x" << W << " = " << eq4 << "\n";
  os << "exact legs C*(ceil(K/d)^2 + (2d-1)^2) = " << legs << "\n";
  os << "exact legs + pointwise C*(ceil(K/d)^2 + (2d-1)^2 + C) = " << decomposed << "\n";
  os << "exact DLKCB branch as built (norm, pointwise in/out with bias, legs with bias, scale) = " << dlkcb_branch
     << "\n";
  os << "direct depth-wise KxK C*K^2 = " << direct << "\n";
  os << "discrepancy eq3 - (legs + pointwise) = " << (eq3 - decomposed)
     << (eq3 == decomposed ? " (formula agrees)" : " (formula disagrees with the constructed layers)") << "\n";
  return os.str();
}

template <typename T>
CostReport count_costs(const Model<T>& model, Index h, Index w) {
  CostReport r;
  r.h = h;
  r.w = w;
  r.rows = model.costs(h, w);
  for (const auto& row : r.rows) {
    r.total_params += row.params;
    r.total_macs += row.macs;
  }
  return r;
}

std::string CostReport::csv() const {
  std::ostringstream os;
  os << "name,kind,params,macs,flops\n";
  for (const auto& row : rows) {
    os << row.name << ",\"" << row.kind << "\"," << row.params << ',' << row.macs << ',' << 2 * row.macs << '\n';
  }
  os << "total,," << total_params << ',' << total_macs << ',' << total_flops() << '\n';
  return os.str();
}

std::vector<ComparisonRow> compare_direct_vs_decomposed(const std::vector<Index>& kernels, Index d, Index C) {
  std::vector<ComparisonRow> rows;
  for (Index K : kernels) {
    ComparisonRow r;
    r.K = K;
    r.d = d;
    r.C = C;
    r.direct = direct_dw_count(K, C);
    r.decomposed = decomposed_count(K, d, C);
    r.legs = r.decomposed - C * C;
    r.eq3 = eval_eq3(K, d, C);
    rows.push_back(r);
  }
  return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "K,d,C,direct_dw,decomposed_legs,decomposed_with_pointwise,eq3,gap_direct_minus_legs\n";
  for (const auto& r : rows) {
    os << r.K << ',' << r.d << ',' << r.C << ',' << r.direct << ',' << r.legs << ',' << r.decomposed << ',' << r.eq3
       << ',' << (r.direct - r.legs) << '\n';
  }
  return os.str();
}

// --- Footprint --------------------------------------------------------------------

Footprint footprint(const Decomposition& dec) {
  dec.validate();
  Footprint f;
  f.decomposition = dec;
  const Index ks = dec.k_small();
  const Index kd = dec.k_dilated();
  const Index d = dec.dilation;
  f.extent = dec.composed_extent();
  // Indicator of the dilated leg on its own (dilated) grid.
  const Index de = d * (kd - 1) + 1;
  std::vector<int> dilated(static_cast<std::size_t>(de * de), 0);
  for (Index i = 0; i < kd; ++i)
    for (Index j = 0; j < kd; ++j) dilated[static_cast<std::size_t>(i * d * de + j * d)] = 1;
  // Full discrete convolution with the dense k_small x k_small indicator.
  std::vector<int> counts(static_cast<std::size_t>(f.extent * f.extent), 0);
  for (Index y = 0; y < de; ++y)
    for (Index x = 0; x < de; ++x) {
      const int v = dilated[static_cast<std::size_t>(y * de + x)];
      if (!v) continue;
      for (Index a = 0; a < ks; ++a)
        for (Index b = 0; b < ks; ++b) counts[static_cast<std::size_t>((y + a) * f.extent + x + b)] += v;
    }
  f.mask.resize(counts.size());
  Index y_lo = f.extent, y_hi = -1, x_lo = f.extent, x_hi = -1;
  for (Index y = 0; y < f.extent; ++y)
    for (Index x = 0; x < f.extent; ++x) {
      const bool on = counts[static_cast<std::size_t>(y * f.extent + x)] > 0;
      f.mask[static_cast<std::size_t>(y * f.extent + x)] = on ? 1 : 0;
      if (on) {
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
      }
    }
  for (Index y = y_lo; y <= y_hi; ++y)
    for (Index x = x_lo; x <= x_hi; ++x) f.holes += f.mask[static_cast<std::size_t>(y * f.extent + x)] ? 0 : 1;
  const Index half = dec.kernel / 2;
  f.covers_target = dec.kernel <= f.extent;
  for (Index dy = -half; dy <= half && f.covers_target; ++dy)
    for (Index dx = -half; dx <= half && f.covers_target; ++dx) f.covers_target = f.contains(dy, dx);
  return f;
}

bool Footprint::contains(Index dy, Index dx) const {
  const Index c = extent / 2;
  const Index y = c + dy, x = c + dx;
  if (y < 0 || y >= extent || x < 0 || x >= extent) return false;
  return mask[static_cast<std::size_t>(y * extent + x)] != 0;
}

std::string Footprint::summary() const {
  const Index ks = decomposition.k_small(), kd = decomposition.k_dilated();
  std::ostringstream os;
  os << "legs " << ks << "×" << ks << " + " << kd << "×" << kd << "(d=" << decomposition.dilation << "), extent "
     << extent << ", holes " << holes << ", covers " << decomposition.kernel << ": " << (covers_target ? "yes" : "no");
  return os.str();
}

// --- ERF --------------------------------------------------------------------------

double area_ratio(const Tensor<double>& map, double t) {
  if (map.empty()) throw ValidationError("area_ratio: empty map");
  if (!(t > 0 && t <= 1)) throw ValidationError("area_ratio: threshold must be in (0, 1]");
  std::vector<double> v(map.span().begin(), map.span().end());
  double total = 0;
  for (double x : v) {
    if (!(x >= 0) || !std::isfinite(x)) throw ValidationError("area_ratio: map entries must be finite and >= 0");
    total += x;
  }
  if (!(total > 0)) throw ValidationError("area_ratio: contribution map has zero total mass");
  std::sort(v.begin(), v.end(), std::greater<>());
  // Relative slack absorbs summation-order rounding for exactly uniform maps.
  const double target = t * total * (1.0 - 1e-12);
  double acc = 0;
  Index count = 0;
  for (double x : v) {
    acc += x;
    ++count;
    if (acc >= target) break;
  }
  return static_cast<double>(count) / static_cast<double>(v.size());
}

ErfReport erf_probe(const Model<float>& model, const ErfOptions& opt, std::string model_id) {
  if (opt.samples < 1) throw ValidationError("erf: samples must be >= 1");
  if (opt.size <= 0 || opt.size % 4 != 0) throw ValidationError("erf: input size must be a positive multiple of 4");
  Model<float> m = model;
  m.set_mode(Mode::eval);
  ErfReport r;
  r.map = Tensor<double>(Shape{1, 1, opt.size, opt.size});
  r.samples = opt.samples;
  r.seed = opt.seed;
  r.tap = tap_name(opt.tap);
  r.model_id = std::move(model_id);
  for (Index s = 0; s < opt.samples; ++s) {
    Rng rng(mix_seed(opt.seed, static_cast<std::uint64_t>(s)));
    Tensor<float> x(Shape{1, 3, opt.size, opt.size});
    for (auto& v : x.span()) v = static_cast<float>(rng.uniform());
    const Tensor<float> feat = m.forward_to(x, opt.tap);
    const Shape& fs = feat.shape();
    Tensor<float> seed_grad(fs);
    for (Index c = 0; c < fs.c; ++c) seed_grad.at(0, c, fs.h / 2, fs.w / 2) = 1.0f;
    const Tensor<float> g = m.backward_from(seed_grad, opt.tap);
    for (Index c = 0; c < 3; ++c) {
      const float* gp = g.plane(0, c);
      for (Index i = 0; i < r.map.numel(); ++i) r.map[i] += std::abs(static_cast<double>(gp[i]));
    }
  }
  for (double t : opt.thresholds) r.r_table.emplace_back(t, area_ratio(r.map, t));
  return r;
}

std::string ErfReport::r_table_text() const {
  std::ostringstream os;
  os << "# model " << model_id << ", tap " << tap << ", samples " << samples << ", seed " << seed << ", map "
     << map.shape().h << "x" << map.shape().w << "\n";
  os << "t,r\n";
  for (const auto& [t, r] : r_table) os << t << ',' << r << '\n';
  return os.str();
}

Tensor<double> log_normalised(const Tensor<double>& map) {
  double hi = 0;
  for (double v : map.span()) hi = std::max(hi, v);
  Tensor<double> out(map.shape());
  if (!(hi > 0)) return out;
  // Three decades below the peak map to 0.
  const double floor = hi * 1e-3;
  const double lo_log = std::log10(floor), hi_log = std::log10(hi);
  for (Index i = 0; i < map.numel(); ++i) {
    const double v = std::max(map[i], floor);
    out[i] = (std::log10(v) - lo_log) / (hi_log - lo_log);
  }
  return out;
}

void write_erf(const ErfReport& report, const std::filesystem::path& prefix) {
  if (prefix.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(prefix.parent_path(), ec);
    if (ec) throw IoError("erf: cannot create " + prefix.parent_path().string());
  }
  save_tensor(std::filesystem::path(prefix.string() + ".lkdt"), report.map);
  const Tensor<double> norm = log_normalised(report.map);
  const Shape& s = norm.shape();
  Tensor<double> heat(Shape{1, 3, s.h, s.w});
  for (Index y = 0; y < s.h; ++y)
    for (Index x = 0; x < s.w; ++x) {
      const double v = norm.at(0, 0, y, x);
      // black -> red -> yellow -> white
      heat.at(0, 0, y, x) = std::clamp(3.0 * v, 0.0, 1.0);
      heat.at(0, 1, y, x) = std::clamp(3.0 * v - 1.0, 0.0, 1.0);
      heat.at(0, 2, y, x) = std::clamp(3.0 * v - 2.0, 0.0, 1.0);
    }
  write_ppm(std::filesystem::path(prefix.string() + ".ppm"), heat);
  std::ofstream os(prefix.string() + "_r.txt", std::ios::trunc);
  if (!os) throw IoError("erf: cannot write " + prefix.string() + "_r.txt");
  os << report.r_table_text();
}

template CostReport count_costs(const Model<float>&, Index, Index);
template CostReport count_costs(const Model<double>&, Index, Index);

}  // namespace lkd
