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

#include "lkd/config.hpp"

#include "lkd/error.hpp"

namespace lkd {

void LkdConfig::validate() const {
  for (int i = 0; i < 5; ++i) {
    if (blocks[i] < 0) throw ValidationError("config: negative block count in stage " + std::to_string(i));
    if (dims[i] <= 0) throw ValidationError("config: non-positive embedding dim in stage " + std::to_string(i));
    if (mlp_ratio[i] < 1) throw ValidationError("config: mlp_ratio must be >= 1 in stage " + std::to_string(i));
  }
  if (dims[0] != dims[4] || dims[1] != dims[3]) {
    throw ValidationError("config: dims must be symmetric (dims[0]==dims[4], dims[1]==dims[3]), got [" +
                          std::to_string(dims[0]) + "," + std::to_string(dims[1]) + "," + std::to_string(dims[2]) +
                          "," + std::to_string(dims[3]) + "," + std::to_string(dims[4]) + "]");
  }
  if (use_dlk) decomposition.validate();
  if (plain_kernel <= 0 || plain_kernel % 2 == 0) throw ValidationError("config: plain_kernel must be odd");
  if (ca_reduction < 1 || sk_reduction < 1) throw ValidationError("config: reductions must be >= 1");
  if (cefn_form == CefnForm::literal && !use_cefn) {
    throw ValidationError("config: cefn_form \"literal\" requires use_cefn");
  }
}

BlockOptions LkdConfig::block_options(int stage) const {
  BlockOptions o;
  o.decomposition = decomposition;
  o.use_dlk = use_dlk;
  o.plain_kernel = plain_kernel;
  o.gating = dlkcb_gating;
  o.use_cefn = use_cefn;
  o.cefn_form = cefn_form;
  o.mlp_ratio = mlp_ratio[static_cast<std::size_t>(stage)];
  o.ca_reduction = ca_reduction;
  o.scale_init = scale_init;
  return o;
}

LkdConfig variant_config(std::string_view name) {
  LkdConfig c;
  if (name == "t" || name == "lkd-t") {
    c.blocks = {1, 1, 2, 1, 1};
  } else if (name == "s" || name == "lkd-s") {
    c.blocks = {2, 2, 4, 2, 2};
  } else if (name == "b" || name == "lkd-b") {
    c.blocks = {4, 4, 8, 4, 4};
  } else if (name == "l" || name == "lkd-l") {
    c.blocks = {8, 8, 16, 8, 8};
  } else if (name == "desk") {
    c.blocks = {1, 1, 1, 1, 1};
    c.dims = {8, 16, 32, 16, 8};
  } else {
    throw ValidationError("unknown variant \"" + std::string(name) + "\" (expected t, s, b, l or desk)");
  }
  return c;
}

std::vector<std::string> variant_names() { return {"t", "s", "b", "l", "desk"}; }

LkdConfig ablation_config(std::string_view name) {
  LkdConfig c = variant_config("t");
  c.use_dlk = c.use_cefn = c.use_sk_fusion = c.use_soft_recon = false;
  if (name == "base") return c;
  c.use_sk_fusion = true;
  if (name == "base+sf") return c;
  c.use_soft_recon = true;
  if (name == "base+sf+sr") return c;
  if (name == "base+sf+sr+dlk") {
    c.use_dlk = true;
    return c;
  }
  if (name == "base+sf+sr+cefn") {
    c.use_cefn = true;
    return c;
  }
  if (name == "full") return variant_config("t");
  throw ValidationError("unknown ablation \"" + std::string(name) + "\"");
}

std::vector<std::string> ablation_names() {
  return {"base", "base+sf", "base+sf+sr", "base+sf+sr+dlk", "base+sf+sr+cefn", "full"};
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, std::string_view where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw ValidationError(std::string(where) + ": unknown key \"" + item.key() + "\"");
    }
  }
}

nlohmann::json config_to_json(const LkdConfig& c) {
  return {
      {"blocks", c.blocks},
      {"dims", c.dims},
      {"mlp_ratio", c.mlp_ratio},
      {"kernel", c.decomposition.kernel},
      {"dilation", c.decomposition.dilation},
      {"use_dlk", c.use_dlk},
      {"use_cefn", c.use_cefn},
      {"use_sk_fusion", c.use_sk_fusion},
      {"use_soft_recon", c.use_soft_recon},
      {"plain_kernel", c.plain_kernel},
      {"dlkcb_gating", c.dlkcb_gating == DlkcbGating::residual ? "residual" : "multiply"},
      {"cefn_form", c.cefn_form == CefnForm::standard ? "standard" : "literal"},
      {"ca_reduction", c.ca_reduction},
      {"sk_reduction", c.sk_reduction},
      {"scale_init", c.scale_init},
  };
}

namespace {

template <typename V>
void read_field(const nlohmann::json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: bad value for \"") + key + "\": " + e.what());
  }
}

}  // namespace

LkdConfig config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"variant", "blocks", "dims", "mlp_ratio", "kernel", "dilation", "use_dlk", "use_cefn",
                       "use_sk_fusion", "use_soft_recon", "plain_kernel", "dlkcb_gating", "cefn_form",
                       "ca_reduction", "sk_reduction", "scale_init"},
                      "model config");
  LkdConfig c;
  if (j.contains("variant")) c = variant_config(j.at("variant").get<std::string>());
  read_field(j, "blocks", c.blocks);
  read_field(j, "dims", c.dims);
  read_field(j, "mlp_ratio", c.mlp_ratio);
  read_field(j, "kernel", c.decomposition.kernel);
  read_field(j, "dilation", c.decomposition.dilation);
  read_field(j, "use_dlk", c.use_dlk);
  read_field(j, "use_cefn", c.use_cefn);
  read_field(j, "use_sk_fusion", c.use_sk_fusion);
  read_field(j, "use_soft_recon", c.use_soft_recon);
  read_field(j, "plain_kernel", c.plain_kernel);
  read_field(j, "ca_reduction", c.ca_reduction);
  read_field(j, "sk_reduction", c.sk_reduction);
  read_field(j, "scale_init", c.scale_init);
  std::string gating = c.dlkcb_gating == DlkcbGating::residual ? "residual" : "multiply";
  read_field(j, "dlkcb_gating", gating);
  if (gating == "residual") {
    c.dlkcb_gating = DlkcbGating::residual;
  } else if (gating == "multiply") {
    c.dlkcb_gating = DlkcbGating::multiply;
  } else {
    throw ValidationError("config: dlkcb_gating must be \"residual\" or \"multiply\"");
  }
  std::string form = c.cefn_form == CefnForm::standard ? "standard" : "literal";
  read_field(j, "cefn_form", form);
  if (form == "standard") {
    c.cefn_form = CefnForm::standard;
  } else if (form == "literal") {
    c.cefn_form = CefnForm::literal;
  } else {
    throw ValidationError("config: cefn_form must be \"standard\" or \"literal\"");
  }
  c.validate();
  return c;
}

}  // namespace lkd
