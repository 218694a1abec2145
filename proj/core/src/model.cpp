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

#include "lkd/model.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lkd/error.hpp"
#include "lkd/tensor_io.hpp"

namespace lkd {

namespace {

constexpr const char* kCheckpointMagic = "LKDCKPT";
constexpr int kCheckpointVersion = 1;

std::string read_line(std::istream& is, const std::string& what) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("checkpoint: truncated before " + what);
  return line;
}

}  // namespace

Tap parse_tap(std::string_view name) {
  if (name == "bottleneck") return Tap::bottleneck;
  if (name == "pre_head" || name == "output-prehead" || name == "prehead") return Tap::pre_head;
  if (name == "output") return Tap::output;
  throw ValidationError("unknown tap \"" + std::string(name) + "\" (expected bottleneck, pre_head or output)");
}

std::string tap_name(Tap tap) {
  switch (tap) {
    case Tap::bottleneck:
      return "bottleneck";
    case Tap::pre_head:
      return "pre_head";
    case Tap::output:
      return "output";
  }
  return "?";
}

// --- SkipFusion -----------------------------------------------------------------

template <typename T>
SkipFusion<T>::SkipFusion(const std::string& name, Index channels, bool selective, Index reduction, Rng& rng)
    : selective_(selective) {
  if (selective_) {
    sk_ = SkFusion<T>(name, channels, reduction, rng);
  } else {
    concat_ = ConcatFusion<T>(name, channels, rng);
  }
}

template <typename T>
Tensor<T> SkipFusion<T>::forward(const Tensor<T>& a, const Tensor<T>& skip) {
  return selective_ ? sk_.forward(a, skip) : concat_.forward(a, skip);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> SkipFusion<T>::backward(const Tensor<T>& grad_out) {
  return selective_ ? sk_.backward(grad_out) : concat_.backward(grad_out);
}

template <typename T>
void SkipFusion<T>::collect(ParamSet<T>& set) {
  if (selective_) {
    sk_.collect(set);
  } else {
    concat_.collect(set);
  }
}

template <typename T>
void SkipFusion<T>::costs(std::vector<LayerCost>& rows, Index h, Index w) const {
  if (selective_) {
    sk_.costs(rows, h, w);
  } else {
    concat_.costs(rows, h, w);
  }
}

// --- Model --------------------------------------------------------------------

template <typename T>
Model<T> Model<T>::build(const LkdConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  Rng rng(seed);
  const auto& dims = config.dims;
  m.stem_ = Conv2d<T>("stem", ConvSpec::dense(3, dims[0], 3), rng);
  for (int s = 0; s < 5; ++s) {
    const BlockOptions opt = config.block_options(s);
    for (Index b = 0; b < config.blocks[static_cast<std::size_t>(s)]; ++b) {
      m.stages_[s].emplace_back("stage" + std::to_string(s) + ".block" + std::to_string(b), dims[s], opt, rng);
    }
    if (s < 2) {
      ConvSpec down;
      down.in_ch = dims[s];
      down.out_ch = dims[s + 1];
      down.kernel = {2, 2};
      down.stride = {2, 2};
      m.down_[s] = Conv2d<T>("down" + std::to_string(s), down, rng);
    }
    if (s >= 2 && s < 4) {
      const int i = s - 2;
      m.up_[i] = Upsample<T>("up" + std::to_string(i), dims[s], dims[s + 1], rng);
      m.fuse_[i] = SkipFusion<T>("fuse" + std::to_string(i), dims[s + 1], config.use_sk_fusion, config.sk_reduction,
                                 rng);
    }
  }
  const Index head_out = config.use_soft_recon ? 4 : 3;
  m.head_ = Conv2d<T>("head", ConvSpec::dense(dims[4], head_out, 3), rng);
  // Start the gain channel at 1 so a fresh network is close to Ĵ = I.
  if (config.use_soft_recon) m.head_.bias().value[0] = T{1};
  return m;
}

template <typename T>
Tensor<T> Model<T>::run_stage(int stage, Tensor<T> x) {
  for (auto& block : stages_[stage]) x = block.forward(x, mode_);
  return x;
}

template <typename T>
Tensor<T> Model<T>::back_stage(int stage, Tensor<T> g) {
  auto& blocks = stages_[stage];
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) g = it->backward(g);
  return g;
}

template <typename T>
Tensor<T> Model<T>::forward_to(const Tensor<T>& image, Tap tap) {
  const Shape& s = image.shape();
  if (s.c != 3) throw ValidationError("model: expected a 3-channel image, got " + s.str());
  if (s.h % 4 != 0 || s.w % 4 != 0 || s.h == 0 || s.w == 0) {
    throw ValidationError("model: H and W must be positive multiples of 4, got " + s.str());
  }
  image_ = image;
  const Tensor<T> e0 = run_stage(0, stem_.forward(image));
  const Tensor<T> e1 = run_stage(1, down_[0].forward(e0));
  Tensor<T> x = run_stage(2, down_[1].forward(e1));
  if (tap == Tap::bottleneck) return x;
  x = run_stage(3, fuse_[0].forward(up_[0].forward(x), e1));
  x = run_stage(4, fuse_[1].forward(up_[1].forward(x), e0));
  if (tap == Tap::pre_head) return x;

  head_out_ = head_.forward(x);
  Tensor<T> out = config_.use_soft_recon ? soft_reconstruction(head_out_, image) : add(head_out_, image);
  clamped_ = mode_ == Mode::eval && eval_clamp_;
  if (clamped_) {
    unclamped_ = out;
    for (auto& v : out.span()) v = std::clamp(v, T{0}, T{1});
  }
  return out;
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& image) {
  return forward_to(image, Tap::output);
}

template <typename T>
Tensor<T> Model<T>::backward_range(Tensor<T> g, Tap start) {
  Tensor<T> grad_image;
  if (start == Tap::output) {
    if (clamped_) {
      for (Index i = 0; i < g.numel(); ++i) {
        if (unclamped_[i] < T{0} || unclamped_[i] > T{1}) g[i] = T{0};
      }
    }
    Tensor<T> g_head;
    if (config_.use_soft_recon) {
      ReconstructionGrads<T> r = soft_reconstruction_backward(head_out_, image_, g);
      g_head = std::move(r.grad_head);
      grad_image = std::move(r.grad_image);
    } else {
      g_head = g;
      grad_image = std::move(g);
    }
    g = head_.backward(g_head);
  }
  Tensor<T> g_skip0;
  Tensor<T> g_skip1;
  if (start != Tap::bottleneck) {
    auto [ga1, gs0] = fuse_[1].backward(back_stage(4, std::move(g)));
    g_skip0 = std::move(gs0);
    auto [ga0, gs1] = fuse_[0].backward(back_stage(3, up_[1].backward(ga1)));
    g_skip1 = std::move(gs1);
    g = up_[0].backward(ga0);
  }
  g = down_[1].backward(back_stage(2, std::move(g)));
  if (!g_skip1.empty()) add_inplace(g, g_skip1);
  g = down_[0].backward(back_stage(1, std::move(g)));
  if (!g_skip0.empty()) add_inplace(g, g_skip0);
  g = stem_.backward(back_stage(0, std::move(g)));
  if (!grad_image.empty()) add_inplace(g, grad_image);
  return g;
}

template <typename T>
Tensor<T> Model<T>::backward(const Tensor<T>& grad_out) {
  if (image_.empty()) throw Error("model: backward called before forward");
  require_same_shape(grad_out.shape(), image_.shape(), "model backward");
  return backward_range(grad_out, Tap::output);
}

template <typename T>
Tensor<T> Model<T>::backward_from(const Tensor<T>& grad, Tap tap) {
  if (image_.empty()) throw Error("model: backward_from called before forward_to");
  return backward_range(grad, tap);
}

template <typename T>
Tensor<T> Model<T>::predict(const Tensor<T>& image) const {
  Model copy = *this;
  copy.set_mode(Mode::eval);
  return copy.forward(image);
}

template <typename T>
ParamSet<T> Model<T>::parameters() {
  ParamSet<T> set;
  stem_.collect(set);
  for (int s = 0; s < 5; ++s) {
    if (s >= 3) {
      up_[s - 3].collect(set);
      fuse_[s - 3].collect(set);
    }
    for (auto& block : stages_[s]) block.collect(set);
    if (s < 2) down_[s].collect(set);
  }
  head_.collect(set);
  return set;
}

template <typename T>
void Model<T>::zero_grad() {
  for (Parameter<T>* p : parameters().params) p->zero_grad();
}

template <typename T>
Index Model<T>::param_count() const {
  Index total = 0;
  for (const LayerCost& row : costs(4, 4)) total += row.params;
  return total;
}

template <typename T>
std::vector<LayerCost> Model<T>::costs(Index h, Index w) const {
  std::vector<LayerCost> rows;
  stem_.costs(rows, h, w);
  Index sh[5] = {h, h / 2, h / 4, h / 2, h};
  Index sw[5] = {w, w / 2, w / 4, w / 2, w};
  for (int s = 0; s < 5; ++s) {
    if (s >= 3) {
      up_[s - 3].costs(rows, sh[s - 1], sw[s - 1]);
      fuse_[s - 3].costs(rows, sh[s], sw[s]);
    }
    for (const auto& block : stages_[s]) block.costs(rows, sh[s], sw[s]);
    if (s < 2) down_[s].costs(rows, sh[s], sw[s]);
  }
  head_.costs(rows, h, w);
  return rows;
}

template <typename T>
void Model<T>::save(const std::filesystem::path& path) const {
  Model copy = *this;
  const ParamSet<T> set = copy.parameters();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << config_to_json(config_).dump() << '\n';
  os << "tensors " << set.params.size() + set.buffers.size() << '\n';
  for (const Parameter<T>* p : set.params) {
    os << "param " << p->name << '\n';
    write_tensor(os, p->value);
  }
  for (const Buffer<T>& b : set.buffers) {
    os << "buffer " << b.name << '\n';
    write_tensor(os, *b.value);
  }
  if (!os) throw IoError("checkpoint: write failed for " + path.string());
}

namespace {

struct CheckpointHeader {
  LkdConfig config;
  std::size_t count = 0;
};

CheckpointHeader read_checkpoint_header(std::istream& is) {
  const std::string magic = read_line(is, "header");
  std::istringstream ms(magic);
  std::string word;
  int version = 0;
  if (!(ms >> word >> version) || word != kCheckpointMagic) throw IoError("checkpoint: bad magic");
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  CheckpointHeader h;
  const std::string cfg = read_line(is, "config");
  try {
    h.config = config_from_json(nlohmann::json::parse(cfg));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad config line: ") + e.what());
  }
  std::istringstream cs(read_line(is, "tensor count"));
  if (!(cs >> word >> h.count) || word != "tensors") throw IoError("checkpoint: bad tensor count line");
  return h;
}

std::pair<std::string, std::string> read_entry_line(std::istream& is) {
  const std::string line = read_line(is, "tensor entry");
  const auto space = line.find(' ');
  if (space == std::string::npos) throw IoError("checkpoint: bad entry line \"" + line + "\"");
  std::string kind = line.substr(0, space);
  if (kind != "param" && kind != "buffer") throw IoError("checkpoint: bad entry kind \"" + kind + "\"");
  return {kind, line.substr(space + 1)};
}

std::filesystem::path require_readable(const std::filesystem::path& path, std::ifstream& is) {
  is.open(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path.string());
  return path;
}

}  // namespace

template <typename T>
Model<T> Model<T>::load(const std::filesystem::path& path) {
  std::ifstream is;
  require_readable(path, is);
  const CheckpointHeader header = read_checkpoint_header(is);
  Model m = build(header.config, 0);
  ParamSet<T> set = m.parameters();
  std::map<std::string, Tensor<T>*> slots;
  for (Parameter<T>* p : set.params) slots[p->name] = &p->value;
  for (Buffer<T>& b : set.buffers) slots[b.name] = b.value;

  std::set<std::string> seen;
  std::vector<std::string> extra;
  for (std::size_t i = 0; i < header.count; ++i) {
    const auto [kind, name] = read_entry_line(is);
    Tensor<T> t = read_tensor<T>(is);
    auto it = slots.find(name);
    if (it == slots.end()) {
      extra.push_back(name);
      continue;
    }
    if (t.shape() != it->second->shape()) {
      throw ValidationError("checkpoint: tensor " + name + " has shape " + t.shape().str() + ", model expects " +
                            it->second->shape().str());
    }
    *it->second = std::move(t);
    seen.insert(name);
  }
  std::vector<std::string> missing;
  for (const auto& [name, slot] : slots) {
    if (!seen.contains(name)) missing.push_back(name);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "checkpoint: name mismatch;";
    msg += " missing [";
    for (std::size_t i = 0; i < missing.size(); ++i) msg += (i ? ", " : "") + missing[i];
    msg += "] extra [";
    for (std::size_t i = 0; i < extra.size(); ++i) msg += (i ? ", " : "") + extra[i];
    msg += "]";
    throw ValidationError(msg);
  }
  return m;
}

Index checkpoint_param_count(const std::filesystem::path& path) {
  std::ifstream is;
  require_readable(path, is);
  const CheckpointHeader header = read_checkpoint_header(is);
  Index total = 0;
  for (std::size_t i = 0; i < header.count; ++i) {
    const auto [kind, name] = read_entry_line(is);
    const TensorHeader th = read_tensor_header(is);
    if (kind == "param") total += static_cast<Index>(th.payload_bytes() / (th.dtype == DType::f32 ? 4 : 8));
  }
  return total;
}

LkdConfig checkpoint_config(const std::filesystem::path& path) {
  std::ifstream is;
  require_readable(path, is);
  return read_checkpoint_header(is).config;
}

template class SkipFusion<float>;
template class SkipFusion<double>;
template class Model<float>;
template class Model<double>;

}  // namespace lkd
