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

#include "lkd/gradcheck.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include "lkd/blocks.hpp"
#include "lkd/error.hpp"
#include "lkd/fusion.hpp"
#include "lkd/model.hpp"
#include "lkd/rng.hpp"
#include "lkd/train.hpp"

namespace lkd {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

using Td = Tensor<double>;

// One differentiable function of some tensors. forward() reads the current
// values of vars; backward(g) must follow a forward() and returns the
// gradients of <g, output> aligned with vars.
struct Probe {
  std::vector<std::string> names;
  std::vector<Td*> vars;
  std::vector<bool> full;  // check every entry, not a sample
  std::function<Td()> forward;
  std::function<std::vector<Td>(const Td&)> backward;
  std::shared_ptr<void> keep;  // owns whatever the closures point into
};

using ProbeFactory = std::function<Probe(std::uint64_t)>;

Td random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Td t(s);
  for (auto& v : t.span()) v = rng.uniform(lo, hi);
  return t;
}

// Values with |x| in [margin, 1]: keeps kinked functions away from the kink.
Td away_from_zero(Shape s, Rng& rng, double margin) {
  Td t(s);
  for (auto& v : t.span()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(margin, 1.0);
  return t;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Moves every parameter away from its initialisation so no branch is
// trivially zero; gains and scales stay positive and O(1).
void randomise(ParamSet<double>& set, Rng& rng) {
  for (Parameter<double>* p : set.params) {
    const bool gain = ends_with(p->name, ".gamma") || ends_with(p->name, ".scale");
    for (auto& v : p->value.span()) v = gain ? rng.uniform(0.5, 1.5) : rng.uniform(-0.5, 0.5);
  }
  for (Buffer<double>& b : set.buffers) {
    const bool var = ends_with(b.name, "running_var");
    for (auto& v : b.value->span()) v = var ? rng.uniform(0.5, 2.0) : rng.uniform(-0.3, 0.3);
  }
}

// Probe over a single-input module: vars = {input, every parameter}.
Probe module_probe(std::shared_ptr<void> keep, Td x0, ParamSet<double> set, std::function<Td(const Td&)> fwd,
                   std::function<Td(const Td&)> bwd) {
  auto x = std::make_shared<Td>(std::move(x0));
  Probe p;
  p.names.push_back("input");
  p.vars.push_back(x.get());
  p.full.push_back(true);
  for (Parameter<double>* prm : set.params) {
    p.names.push_back(prm->name);
    p.vars.push_back(&prm->value);
    p.full.push_back(false);
  }
  p.forward = [x, fwd] { return fwd(*x); };
  p.backward = [set, bwd](const Td& g) {
    for (Parameter<double>* prm : set.params) prm->zero_grad();
    std::vector<Td> out{bwd(g)};
    for (Parameter<double>* prm : set.params) out.push_back(prm->grad);
    return out;
  };
  auto both = std::make_shared<std::pair<std::shared_ptr<void>, std::shared_ptr<Td>>>(std::move(keep), x);
  p.keep = both;
  return p;
}

template <typename Layer>
ProbeFactory layer_case(std::function<Layer(Rng&)> make, Shape input, double margin = 0.0) {
  return [make, input, margin](std::uint64_t seed) {
    Rng rng(seed);
    auto layer = std::make_shared<Layer>(make(rng));
    ParamSet<double> set;
    layer->collect(set);
    randomise(set, rng);
    Td x = margin > 0 ? away_from_zero(input, rng, margin) : random_tensor(input, rng);
    return module_probe(
        layer, std::move(x), set, [layer](const Td& v) { return layer->forward(v); },
        [layer](const Td& g) { return layer->backward(g); });
  };
}

template <typename Layer>
ProbeFactory moded_case(std::function<Layer(Rng&)> make, Shape input, Mode mode) {
  return [make, input, mode](std::uint64_t seed) {
    Rng rng(seed);
    auto layer = std::make_shared<Layer>(make(rng));
    ParamSet<double> set;
    layer->collect(set);
    randomise(set, rng);
    return module_probe(
        layer, random_tensor(input, rng), set, [layer, mode](const Td& v) { return layer->forward(v, mode); },
        [layer](const Td& g) { return layer->backward(g); });
  };
}

ProbeFactory function_case(std::function<Td(const Td&)> fwd, std::function<Td(const Td&, const Td&)> bwd, Shape input,
                           double margin = 0.0) {
  return [fwd, bwd, input, margin](std::uint64_t seed) {
    Rng rng(seed);
    Td x = margin > 0 ? away_from_zero(input, rng, margin) : random_tensor(input, rng);
    auto last = std::make_shared<Td>();
    return module_probe(
        last, std::move(x), {},
        [fwd, last](const Td& v) {
          *last = v;
          return fwd(v);
        },
        [bwd, last](const Td& g) { return bwd(*last, g); });
  };
}

// Two-input probe for the fusion ops.
template <typename Fusion>
ProbeFactory fusion_case(std::function<Fusion(Rng&)> make, Shape input) {
  return [make, input](std::uint64_t seed) {
    Rng rng(seed);
    auto fusion = std::make_shared<Fusion>(make(rng));
    ParamSet<double> set;
    fusion->collect(set);
    randomise(set, rng);
    auto a = std::make_shared<Td>(random_tensor(input, rng));
    auto b = std::make_shared<Td>(random_tensor(input, rng));
    Probe p;
    p.names = {"a", "skip"};
    p.vars = {a.get(), b.get()};
    p.full = {true, true};
    for (Parameter<double>* prm : set.params) {
      p.names.push_back(prm->name);
      p.vars.push_back(&prm->value);
      p.full.push_back(false);
    }
    p.forward = [fusion, a, b] { return fusion->forward(*a, *b); };
    p.backward = [fusion, set](const Td& g) {
      for (Parameter<double>* prm : set.params) prm->zero_grad();
      auto [ga, gb] = fusion->backward(g);
      std::vector<Td> out{ga, gb};
      for (Parameter<double>* prm : set.params) out.push_back(prm->grad);
      return out;
    };
    p.keep = std::make_shared<std::tuple<std::shared_ptr<Fusion>, std::shared_ptr<Td>, std::shared_ptr<Td>>>(fusion, a, b);
    return p;
  };
}

BlockOptions block_options(bool dlk, DlkcbGating gating, bool cefn, CefnForm form) {
  BlockOptions o;
  o.use_dlk = dlk;
  o.gating = gating;
  o.use_cefn = cefn;
  o.cefn_form = form;
  o.decomposition = {9, 3};  // legs 5x5 + 3x3 (d=3); fits the 8x8 test inputs
  o.plain_kernel = 5;
  o.ca_reduction = 2;  // four hidden units, so the gate is not one ReLU away from constant
  return o;
}

struct NamedCase {
  NamedCase(std::string n, ProbeFactory f, std::vector<std::string> ex = {})
      : name(std::move(n)), factory(std::move(f)), exclude(std::move(ex)) {}

  std::string name;
  ProbeFactory factory;
  std::vector<std::string> exclude;  // parameters whose name contains one of these are not compared
};

std::vector<NamedCase> all_cases() {
  std::vector<NamedCase> cases;
  const Shape small{2, 4, 8, 8};

  auto conv = [&](const std::string& name, ConvSpec spec, Shape in) {
    cases.push_back(
        {name, layer_case<Conv2d<double>>([spec](Rng& r) { return Conv2d<double>("conv", spec, r); }, in), {}});
  };
  conv("conv_dense", ConvSpec::dense(4, 3, 3), small);
  {
    ConvSpec s;
    s.in_ch = 4;
    s.out_ch = 6;
    s.kernel = {2, 2};
    s.stride = {2, 2};
    conv("conv_strided", s, small);
  }
  {
    ConvSpec s;
    s.in_ch = 4;
    s.out_ch = 4;
    s.kernel = {3, 3};
    s.groups = 2;
    s.padding = {1, 2};
    conv("conv_grouped", s, small);
  }
  conv("conv_depthwise", ConvSpec::depthwise(4, 5), small);
  conv("conv_dilated_depthwise", ConvSpec::depthwise(4, 5, 2), small);
  conv("conv_pointwise", ConvSpec::pointwise(4, 5, false), small);

  cases.push_back({"batchnorm_train", moded_case<BatchNorm2d<double>>(
                                          [](Rng&) { return BatchNorm2d<double>("bn", 3); }, {2, 3, 4, 4}, Mode::train)});
  cases.push_back({"batchnorm_eval", moded_case<BatchNorm2d<double>>(
                                         [](Rng&) { return BatchNorm2d<double>("bn", 3); }, {2, 3, 4, 4}, Mode::eval)});

  auto act = [&](const std::string& name, Activation kind, double margin) {
    cases.push_back({name, function_case([kind](const Td& x) { return activation_forward(kind, x); },
                                         [kind](const Td& x, const Td& g) { return activation_backward(kind, x, g); },
                                         small, margin)});
  };
  act("relu", Activation::relu, 0.05);
  act("gelu", Activation::gelu, 0.0);
  act("sigmoid", Activation::sigmoid, 0.0);

  cases.push_back({"linear", layer_case<Linear<double>>([](Rng& r) { return Linear<double>("fc", 6, 4, true, r); },
                                                        {3, 6, 1, 1})});
  cases.push_back({"channel_scale", layer_case<ChannelScale<double>>(
                                        [](Rng&) { return ChannelScale<double>("scale", 4, 0.5); }, small)});
  cases.push_back({"pixel_shuffle", function_case([](const Td& x) { return pixel_shuffle(x, 2); },
                                                  [](const Td&, const Td& g) { return pixel_unshuffle(g, 2); },
                                                  {2, 8, 4, 4})});
  cases.push_back({"pixel_unshuffle", function_case([](const Td& x) { return pixel_unshuffle(x, 2); },
                                                    [](const Td&, const Td& g) { return pixel_shuffle(g, 2); }, small)});
  cases.push_back({"global_avg_pool",
                   function_case([](const Td& x) { return global_avg_pool(x); },
                                 [](const Td& x, const Td& g) {
                                   Td out(x.shape());
                                   const Shape& s = x.shape();
                                   for (Index n = 0; n < s.n; ++n)
                                     for (Index c = 0; c < s.c; ++c) {
                                       const double v = g[n * s.c + c] / static_cast<double>(s.plane());
                                       std::fill(out.plane(n, c), out.plane(n, c) + s.plane(), v);
                                     }
                                   return out;
                                 },
                                 small)});
  // One tensor feeding two consumers: y = x ⊙ x + 3 x; the gradient is the sum of both paths.
  cases.push_back({"two_consumers",
                   function_case([](const Td& x) { return add(mul(x, x), scale(x, 3.0)); },
                                 [](const Td& x, const Td& g) {
                                   Td out = mul(g, x);
                                   add_inplace(out, mul(g, x));
                                   add_inplace(out, scale(g, 3.0));
                                   return out;
                                 },
                                 small)});

  cases.push_back({"channel_attention", layer_case<ChannelAttention<double>>(
                                            [](Rng& r) { return ChannelAttention<double>("ca", 8, 8, r); }, {2, 8, 4, 4})});

  // Composite blocks run twice: with batch norm in eval mode (frozen
  // statistics), where every parameter has a genuine gradient, and in train
  // mode. A train-mode norm makes a per-channel shift or positive scale applied
  // just before it gradient-free, so those parameters are excluded from the
  // train-mode runs (their true gradient is 0 and central differences only
  // see roundoff there). That covers the plain feed-forward's last bias; with
  // attention the gate varies per sample, which keeps that bias live. In the
  // literal form the whole attention gate sits in front of a train-mode norm,
  // so only its between-sample variation reaches the loss and its gradients
  // are roundoff-sized; the same holds for the first of the two stacked norms.
  // Both are checked in eval mode.
  auto block = [&]<typename B>(const std::string& name, BlockOptions o, Shape in, B*,
                               std::vector<std::string> train_exclude) {
    auto make = [o, in](Rng& r) { return B("blk", in.c, o, r); };
    cases.push_back({name, moded_case<B>(make, in, Mode::eval), {}});
    cases.push_back({name + "_train", moded_case<B>(make, in, Mode::train), std::move(train_exclude)});
  };
  const Shape cefn_in{2, 8, 8, 8};
  block("cefn", block_options(true, DlkcbGating::residual, true, CefnForm::standard), cefn_in,
        static_cast<Cefn<double>*>(nullptr), {});
  block("cefn_literal", block_options(true, DlkcbGating::residual, true, CefnForm::literal), cefn_in,
        static_cast<Cefn<double>*>(nullptr), {"blk.scale", "blk.ca.", "blk.norm_in."});
  block("fn_plain", block_options(true, DlkcbGating::residual, false, CefnForm::standard), small,
        static_cast<Cefn<double>*>(nullptr), {"reduce.bias"});
  block("dlkcb", block_options(true, DlkcbGating::residual, true, CefnForm::standard), small,
        static_cast<Dlkcb<double>*>(nullptr), {});
  block("dlkcb_multiply", block_options(true, DlkcbGating::multiply, true, CefnForm::standard), small,
        static_cast<Dlkcb<double>*>(nullptr), {});
  block("dlkcb_plain_kernel", block_options(false, DlkcbGating::residual, true, CefnForm::standard), small,
        static_cast<Dlkcb<double>*>(nullptr), {});
  block("lkd_block", block_options(true, DlkcbGating::residual, true, CefnForm::standard), cefn_in,
        static_cast<LkdBlock<double>*>(nullptr), {});

  cases.push_back({"sk_fusion", fusion_case<SkFusion<double>>(
                                    [](Rng& r) { return SkFusion<double>("sk", 4, 8, r); }, small)});
  cases.push_back({"concat_fusion", fusion_case<ConcatFusion<double>>(
                                        [](Rng& r) { return ConcatFusion<double>("cat", 4, r); }, small)});
  cases.push_back({"upsample", layer_case<Upsample<double>>([](Rng& r) { return Upsample<double>("up", 4, 3, r); },
                                                            {2, 4, 4, 4})});

  cases.push_back({"soft_reconstruction", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto head = std::make_shared<Td>(random_tensor({2, 4, 8, 8}, rng));
                     auto image = std::make_shared<Td>(random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0));
                     Probe p;
                     p.names = {"head", "image"};
                     p.vars = {head.get(), image.get()};
                     p.full = {true, true};
                     p.forward = [head, image] { return soft_reconstruction(*head, *image); };
                     p.backward = [head, image](const Td& g) {
                       auto r = soft_reconstruction_backward(*head, *image, g);
                       return std::vector<Td>{r.grad_head, r.grad_image};
                     };
                     p.keep = std::make_shared<std::pair<std::shared_ptr<Td>, std::shared_ptr<Td>>>(head, image);
                     return p;
                   }});

  cases.push_back({"l1_loss", [](std::uint64_t seed) {
                     Rng rng(seed);
                     auto target = std::make_shared<Td>(random_tensor(Shape{2, 3, 8, 8}, rng));
                     // pred = target + offset with |offset| >= 0.05 keeps clear of ties.
                     auto pred = std::make_shared<Td>(add(*target, away_from_zero({2, 3, 8, 8}, rng, 0.05)));
                     Probe p;
                     p.names = {"pred"};
                     p.vars = {pred.get()};
                     p.full = {true};
                     p.forward = [pred, target] { return Td(Shape{1, 1, 1, 1}, l1_loss(*pred, *target).value); };
                     p.backward = [pred, target](const Td& g) {
                       return std::vector<Td>{scale(l1_loss(*pred, *target).grad, g[0])};
                     };
                     p.keep = std::make_shared<std::pair<std::shared_ptr<Td>, std::shared_ptr<Td>>>(pred, target);
                     return p;
                   }});

  auto model_case = [](Mode mode) {
    return [mode](std::uint64_t seed) {
      LkdConfig cfg = variant_config("desk");
      cfg.dims = {4, 8, 8, 8, 4};
      cfg.decomposition = {9, 3};
      cfg.ca_reduction = 1;  // the narrow stages still get a gate that varies per sample
      auto model = std::make_shared<Model<double>>(Model<double>::build(cfg, seed));
      model->set_mode(mode);
      model->set_eval_clamp(false);  // the clamp is a kink, not part of the network
      Rng rng(mix_seed(seed, 7));
      ParamSet<double> set = model->parameters();
      randomise(set, rng);
      Td x = random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0);
      return module_probe(
          model, std::move(x), set, [model](const Td& v) { return model->forward(v); },
          [model](const Td& g) { return model->backward(g); });
    };
  };
  cases.push_back({"model_tiny", model_case(Mode::eval), {}});
  cases.push_back({"model_tiny_train", model_case(Mode::train), {}});
  return cases;
}

std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

double dot(const Td& a, const Td& b) {
  double s = 0;
  for (Index i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

GradCheckResult run_case(const NamedCase& c, const GradCheckOptions& opt) {
  GradCheckResult res;
  res.name = c.name;
  res.seeds = opt.seeds;
  for (int s = 0; s < opt.seeds; ++s) {
    const std::uint64_t seed = mix_seed(opt.base_seed, static_cast<std::uint64_t>(s) * 1000 + 17);
    Probe p = c.factory(seed);
    Rng rng(mix_seed(seed, 99));
    const Td out = p.forward();
    const Td weights = random_tensor(out.shape(), rng);
    const std::vector<Td> analytic = p.backward(weights);
    if (analytic.size() != p.vars.size()) throw Error("gradcheck: " + c.name + " returned the wrong gradient count");
    for (std::size_t v = 0; v < p.vars.size(); ++v) {
      const bool skip = std::any_of(c.exclude.begin(), c.exclude.end(),
                                    [&](const std::string& part) { return p.names[v].find(part) != std::string::npos; });
      if (skip) {
        if (s == 0) res.excluded.push_back(p.names[v]);
        continue;
      }
      Td& var = *p.vars[v];
      require_same_shape(analytic[v].shape(), var.shape(), "gradcheck gradient");
      std::vector<Index> entries(static_cast<std::size_t>(var.numel()));
      std::iota(entries.begin(), entries.end(), Index{0});
      if (!p.full[v] && var.numel() > opt.param_samples) {
        for (Index i = 0; i < opt.param_samples; ++i) {
          const Index j = rng.uniform_int(i, var.numel() - 1);
          std::swap(entries[static_cast<std::size_t>(i)], entries[static_cast<std::size_t>(j)]);
        }
        entries.resize(static_cast<std::size_t>(opt.param_samples));
      }
      for (Index e : entries) {
        const double saved = var[e];
        var[e] = saved + opt.step;
        const Td plus = p.forward();
        var[e] = saved - opt.step;
        const Td minus = p.forward();
        var[e] = saved;
        // Differencing the outputs before the weighted sum keeps large
        // pass-through terms (residuals) from swamping the difference.
        const double numeric = dot(weights, sub(plus, minus)) / (2 * opt.step);
        const double a = analytic[v][e];
        const double err = relative_error(a, numeric, opt.floor);
        ++res.checked;
        if (err > res.max_rel_error || !std::isfinite(err)) {
          res.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
          res.worst = "seed " + std::to_string(s) + " " + p.names[v] + "[" + std::to_string(e) +
                      "] analytic " + format_sci(a) + " numeric " + format_sci(numeric);
        }
      }
    }
  }
  res.passed = res.max_rel_error < opt.tolerance;
  return res;
}

}  // namespace

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> names;
  for (const auto& c : all_cases()) names.push_back(c.name);
  return names;
}

std::vector<GradCheckResult> run_gradchecks(const std::string& filter, const GradCheckOptions& opt) {
  if (opt.seeds < 1) throw ValidationError("gradcheck: seeds must be >= 1");
  std::vector<GradCheckResult> results;
  for (const auto& c : all_cases()) {
    if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
    results.push_back(run_case(c, opt));
  }
  if (results.empty()) throw ValidationError("gradcheck: no check matches \"" + filter + "\"");
  return results;
}

GradCheckResult run_gradcheck(const std::string& name, const GradCheckOptions& opt) {
  if (opt.seeds < 1) throw ValidationError("gradcheck: seeds must be >= 1");
  for (const auto& c : all_cases()) {
    if (c.name == name) return run_case(c, opt);
  }
  throw ValidationError("gradcheck: unknown check \"" + name + "\"");
}

}  // namespace lkd
