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

#include "lkd/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "lkd/error.hpp"
#include "lkd/metrics.hpp"
#include "lkd/rng.hpp"

namespace lkd {

void TrainConfig::validate() const {
  if (steps < 0) throw ValidationError("train: steps must be >= 0");
  if (batch < 1) throw ValidationError("train: batch must be >= 1");
  if (patch <= 0 || patch % 4 != 0) throw ValidationError("train: patch must be a positive multiple of 4");
  if (!(lr0 >= 0) || !(lr_min >= 0)) throw ValidationError("train: learning rates must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ValidationError("train: betas must be in [0, 1)");
  if (!(weight_decay >= 0)) throw ValidationError("train: weight_decay must be >= 0");
  if (!(eps > 0)) throw ValidationError("train: eps must be > 0");
  if (eval_every < 0) throw ValidationError("train: eval_every must be >= 0");
}

template <typename T>
Loss<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "l1_loss");
  if (pred.empty()) throw ValidationError("l1_loss: empty input");
  Loss<T> out{0, Tensor<T>(pred.shape())};
  const T inv = T{1} / static_cast<T>(pred.numel());
  double sum = 0;
  for (Index i = 0; i < pred.numel(); ++i) {
    const T d = pred[i] - target[i];
    sum += std::abs(static_cast<double>(d));
    out.grad[i] = d > T{0} ? inv : (d < T{0} ? -inv : T{0});
  }
  out.value = sum / static_cast<double>(pred.numel());
  return out;
}

double cosine_lr(Index step, Index total, double lr0, double lr_min) {
  if (total <= 0) throw ValidationError("cosine_lr: total steps must be > 0");
  if (step < 0 || step > total) {
    throw ValidationError("cosine_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(total) + "]");
  }
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
  return lr_min + (lr0 - lr_min) * (1.0 + std::cos(phase)) / 2.0;
}

template <typename T>
void AdamW<T>::step(const std::vector<Parameter<T>*>& params, double lr) {
  for (const Parameter<T>* p : params) {
    if (!all_finite(p->grad.span())) throw NumericError("adamw: non-finite gradient in " + p->name);
  }
  if (m_.empty()) {
    for (const Parameter<T>* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) throw ValidationError("adamw: parameter list changed between steps");
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double decay = 1.0 - lr * cfg_.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    require_same_shape(p.value.shape(), m_[k].shape(), "adamw state");
    T* w = p.value.data();
    const T* g = p.grad.data();
    T* m = m_[k].data();
    T* v = v_[k].data();
    for (Index i = 0; i < p.value.numel(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double wi = static_cast<double>(w[i]) * decay;
      w[i] = static_cast<T>(wi - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps));
    }
    p.zero_grad();
  }
}

EvalResult evaluate(const Model<float>& model, const std::vector<HazePair>& pairs) {
  Model<float> m = model;
  m.set_mode(Mode::eval);
  EvalResult r;
  for (const HazePair& p : pairs) {
    const Tensor<float> out = m.forward(p.hazy);
    r.psnr.push_back(psnr(out, p.clean));
    r.ssim.push_back(ssim(out, p.clean));
    r.hazy_psnr.push_back(psnr(p.hazy, p.clean));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  r.mean_psnr = mean(r.psnr);
  r.mean_ssim = mean(r.ssim);
  r.mean_hazy_psnr = mean(r.hazy_psnr);
  return r;
}

namespace {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Fills batch slot b with a random crop of one pair.
void sample_crop(const HazePair& pair, Index patch, Rng& rng, Tensor<float>& hazy, Tensor<float>& clean, Index b) {
  const Shape& s = pair.hazy.shape();
  if (s.h < patch || s.w < patch) {
    throw ValidationError("train: image " + s.str() + " is smaller than the patch size " + std::to_string(patch));
  }
  const Index y0 = rng.uniform_int(0, s.h - patch);
  const Index x0 = rng.uniform_int(0, s.w - patch);
  for (Index c = 0; c < 3; ++c)
    for (Index y = 0; y < patch; ++y)
      for (Index x = 0; x < patch; ++x) {
        hazy.at(b, c, y, x) = pair.hazy.at(0, c, y0 + y, x0 + x);
        clean.at(b, c, y, x) = pair.clean.at(0, c, y0 + y, x0 + x);
      }
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<TrainRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("train: cannot write " + path.string());
  os << "step,lr,loss,psnr,ssim\n";
  for (const TrainRecord& r : records) {
    os << r.step << ',' << format_number(r.lr) << ',' << format_number(r.loss) << ',' << format_number(r.psnr) << ','
       << format_number(r.ssim) << '\n';
  }
  if (!os) throw IoError("train: write failed for " + path.string());
}

TrainResult train(Model<float>& model, const std::vector<HazePair>& train_pairs,
                  const std::vector<HazePair>& eval_pairs, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir) {
  cfg.validate();
  if (train_pairs.empty()) throw ValidationError("train: the training set is empty");
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("train: cannot create " + out_dir.string() + ": " + ec.message());
  }
  const std::vector<HazePair> fallback(train_pairs.begin(),
                                       train_pairs.begin() + std::min<std::size_t>(train_pairs.size(), 8));
  const std::vector<HazePair>& eval_set = eval_pairs.empty() ? fallback : eval_pairs;

  AdamW<float> opt({cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay});
  TrainResult result;
  Model<float> last_good = model;
  model.set_mode(Mode::train);
  model.zero_grad();

  const Shape batch_shape{cfg.batch, 3, cfg.patch, cfg.patch};
  Tensor<float> hazy(batch_shape), clean(batch_shape);
  double window_loss = 0;
  Index window_steps = 0;

  auto finish = [&] {
    if (out_dir.empty()) return;
    write_metrics_csv(out_dir / "metrics.csv", result.records);
    model.save(out_dir / "model.ckpt");
  };

  for (Index step = 0; step < cfg.steps; ++step) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
    for (Index b = 0; b < cfg.batch; ++b) {
      const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<Index>(train_pairs.size()) - 1));
      sample_crop(train_pairs[k], cfg.patch, rng, hazy, clean, b);
    }
    const double lr = cosine_lr(step, cfg.steps, cfg.lr0, cfg.lr_min);
    const Tensor<float> pred = model.forward(hazy);
    const Loss<float> loss = l1_loss(pred, clean);
    try {
      if (!std::isfinite(loss.value)) throw NumericError("train: non-finite loss at step " + std::to_string(step + 1));
      model.backward(loss.grad);
      opt.step(model.parameters().params, lr);
    } catch (const NumericError&) {
      model = last_good;
      finish();
      throw;
    }
    result.losses.push_back(loss.value);
    window_loss += loss.value;
    ++window_steps;

    const Index done = step + 1;
    if ((cfg.eval_every > 0 && done % cfg.eval_every == 0) || done == cfg.steps) {
      const EvalResult e = evaluate(model, eval_set);
      result.records.push_back({done, lr, window_loss / static_cast<double>(window_steps), e.mean_psnr, e.mean_ssim});
      window_loss = 0;
      window_steps = 0;
      last_good = model;
    }
  }
  model.set_mode(Mode::eval);
  finish();
  return result;
}

template Loss<float> l1_loss(const Tensor<float>&, const Tensor<float>&);
template Loss<double> l1_loss(const Tensor<double>&, const Tensor<double>&);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace lkd
