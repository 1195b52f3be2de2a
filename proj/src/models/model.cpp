#include "octbio/models/model.hpp"

#include <cmath>

#include "octbio/core/error.hpp"

namespace octbio::models {

using namespace octbio::tensor;

std::string to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::CONV_CBAM: return "CONV_CBAM";
    case BackboneKind::LOCAL_ATTN: return "LOCAL_ATTN";
    case BackboneKind::GLOBAL_ATTN: return "GLOBAL_ATTN";
  }
  return "?";
}

BackboneKind parse_backbone_kind(const std::string& text) {
  for (auto k : {BackboneKind::CONV_CBAM, BackboneKind::LOCAL_ATTN, BackboneKind::GLOBAL_ATTN}) {
    if (to_string(k) == text) return k;
  }
  throw ContractError("unknown backbone kind '" + text + "'");
}

void BackboneSpec::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ContractError("backbone spec: " + msg);
  };
  need(input_size >= 8, "input_size must be >= 8");
  need(width >= 1, "width must be positive");
  need(depth >= 1, "depth must be positive");
  need(n_outputs == kBiomarkerOutputs || n_outputs == kBiomarkerOutputs + kClinicalOutputs, "n_outputs must be 6 or 8");
  need(mlp_ratio >= 1, "mlp_ratio must be positive");
  if (kind == BackboneKind::CONV_CBAM) {
    need(input_size % 8 == 0, "CONV_CBAM input_size must be divisible by 8");
    need(cbam_reduction >= 1, "cbam_reduction must be >= 1");
    need(cbam_kernel >= 1 && cbam_kernel % 2 == 1, "cbam_kernel must be odd");
    return;
  }
  need(heads >= 1 && width % heads == 0, "heads must divide width");
  need(patch >= 1 && input_size % patch == 0, "patch must divide input_size");
  if (kind == BackboneKind::LOCAL_ATTN) {
    need(patch >= 2 && patch % 2 == 0, "LOCAL_ATTN patch must be even");
    const int g = grid_size();
    if (window < 1 || g % window != 0) {
      throw ContractError("backbone spec: token grid H=" + std::to_string(g) + ", W=" + std::to_string(g) +
                          " is not divisible by window " + std::to_string(window));
    }
  }
}

nlohmann::ordered_json BackboneSpec::to_json() const {
  return {{"kind", to_string(kind)},         {"input_size", input_size},
          {"width", width},                  {"depth", depth},
          {"window", window},                {"heads", heads},
          {"patch", patch},                  {"mlp_ratio", mlp_ratio},
          {"n_outputs", n_outputs},          {"use_cbam", use_cbam},
          {"cbam_reduction", cbam_reduction}, {"cbam_kernel", cbam_kernel}};
}

BackboneSpec BackboneSpec::from_json(const nlohmann::ordered_json& j) {
  BackboneSpec s;
  s.kind = parse_backbone_kind(j.at("kind").get<std::string>());
  s.input_size = j.at("input_size").get<int>();
  s.width = j.at("width").get<int>();
  s.depth = j.at("depth").get<int>();
  s.window = j.at("window").get<int>();
  s.heads = j.at("heads").get<int>();
  s.patch = j.at("patch").get<int>();
  s.mlp_ratio = j.at("mlp_ratio").get<int>();
  s.n_outputs = j.at("n_outputs").get<int>();
  s.use_cbam = j.at("use_cbam").get<bool>();
  s.cbam_reduction = j.at("cbam_reduction").get<int>();
  s.cbam_kernel = j.at("cbam_kernel").get<int>();
  return s;
}

// --- CONV_CBAM -------------------------------------------------------------

ConvCbamNet::ConvCbamNet(BackboneSpec spec, std::uint64_t init_seed) : Model(std::move(spec)) {
  spec_.validate();
  const Initializer init(init_seed);
  std::int64_t in = 3;
  for (int s = 0; s < 3; ++s) {
    const std::string stage = kStageNames[s];
    const std::int64_t out = stage_channels(s);
    std::vector<Conv2d> convs;
    for (int d = 0; d < spec_.depth; ++d) {
      const std::string name = stage + ".conv" + std::to_string(d);
      convs.push_back(make_conv(params_, init, name, d == 0 ? in : out, out, 3, d == 0 ? 2 : 1, 1));
    }
    stages_.push_back(std::move(convs));
    in = out;
  }
  if (spec_.use_cbam) {
    for (int s = 0; s < 3; ++s) {
      cbam_.push_back(make_cbam(params_, init, std::string(kStageNames[s]) + ".cbam", cbam_params(s)));
    }
  }
  head_ = make_linear(params_, init, "head", in, spec_.n_outputs);
}

CbamParams ConvCbamNet::cbam_params(int stage) const {
  return {stage_channels(stage), spec_.cbam_reduction, spec_.cbam_kernel};
}

Tensor ConvCbamNet::logits(const Tensor& batch) const {
  Tensor x = batch;
  for (int s = 0; s < 3; ++s) {
    for (const auto& conv : stages_[static_cast<std::size_t>(s)]) x = relu(conv(x));
    if (spec_.use_cbam) x = cbam_apply(x, cbam_params(s), cbam_[static_cast<std::size_t>(s)], gates_);
  }
  const Tensor pooled = reshape(mean(x, {2, 3}), {x.dim(0), x.dim(1)});
  return head_(pooled);
}

// --- LOCAL_ATTN ------------------------------------------------------------

namespace {

Conv2d make_patch_embed(ParameterSet& params, const Initializer& init, const BackboneSpec& spec) {
  return make_conv(params, init, "patch_embed", 3, spec.width, spec.patch, spec.patch, 0);
}

// [B, C, H, W] <-> [B, H, W, C]
Tensor to_channels_last(const Tensor& x) { return permute(x, {0, 2, 3, 1}); }
Tensor to_channels_first(const Tensor& x) { return permute(x, {0, 3, 1, 2}); }

}  // namespace

LocalAttnNet::LocalAttnNet(BackboneSpec spec, std::uint64_t init_seed) : Model(std::move(spec)) {
  if (spec_.kind != BackboneKind::LOCAL_ATTN) throw ContractError("LocalAttnNet needs a LOCAL_ATTN spec");
  spec_.validate();
  const Initializer init(init_seed);
  const std::int64_t c = spec_.width, hidden = c * spec_.mlp_ratio;
  stem1_ = make_conv(params_, init, "stem.conv1", 3, c, 3, 2, 1);
  stem2_ = make_conv(params_, init, "stem.conv2", c, c, 3, 1, 1);
  stem_proj_ = make_conv(params_, init, "stem.proj", c, c, spec_.patch / 2, spec_.patch / 2, 0);
  for (int i = 0; i < spec_.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i);
    Block b;
    b.expand = make_conv(params_, init, p + ".mbconv.expand", c, hidden, 1, 1, 0);
    b.depthwise = make_conv(params_, init, p + ".mbconv.depthwise", hidden, hidden, 3, 1, 1, hidden);
    b.project = make_conv(params_, init, p + ".mbconv.project", hidden, c, 1, 1, 0);
    b.norm_block = make_layer_norm(params_, p + ".norm_block", c);
    b.block_attn = make_attention(params_, init, p + ".block_attn", c);
    b.norm_mlp1 = make_layer_norm(params_, p + ".norm_mlp1", c);
    b.mlp1 = make_mlp(params_, init, p + ".mlp1", c, hidden);
    b.norm_grid = make_layer_norm(params_, p + ".norm_grid", c);
    b.grid_attn = make_attention(params_, init, p + ".grid_attn", c);
    b.norm_mlp2 = make_layer_norm(params_, p + ".norm_mlp2", c);
    b.mlp2 = make_mlp(params_, init, p + ".mlp2", c, hidden);
    blocks_.push_back(std::move(b));
  }
  norm_ = make_layer_norm(params_, "norm", c);
  head_ = make_linear(params_, init, "head", c, spec_.n_outputs);
}

Tensor LocalAttnNet::logits(const Tensor& batch) const {
  Tensor x = stem_proj_(gelu(stem2_(gelu(stem1_(batch)))));  // [B, C, G, G]
  const std::int64_t w = spec_.window;
  for (const auto& b : blocks_) {
    x = add(x, b.project(gelu(b.depthwise(gelu(b.expand(x))))));
    Tensor t = to_channels_last(x);
    t = add(t, windowed_attention(b.norm_block(t), w, AttentionMode::BLOCK, spec_.heads, b.block_attn));
    t = add(t, b.mlp1(b.norm_mlp1(t)));
    t = add(t, windowed_attention(b.norm_grid(t), w, AttentionMode::GRID, spec_.heads, b.grid_attn));
    t = add(t, b.mlp2(b.norm_mlp2(t)));
    x = to_channels_first(t);
  }
  // Pool, then normalise (MaxViT head order).
  const Tensor t = to_channels_last(x);
  return head_(norm_(reshape(mean(t, {1, 2}), {t.dim(0), t.dim(3)})));
}

// --- GLOBAL_ATTN -----------------------------------------------------------

GlobalAttnNet::GlobalAttnNet(BackboneSpec spec, std::uint64_t init_seed) : Model(std::move(spec)) {
  if (spec_.kind != BackboneKind::GLOBAL_ATTN) throw ContractError("GlobalAttnNet needs a GLOBAL_ATTN spec");
  spec_.validate();
  const Initializer init(init_seed);
  const std::int64_t c = spec_.width, hidden = c * spec_.mlp_ratio;
  const std::int64_t tokens = static_cast<std::int64_t>(spec_.grid_size()) * spec_.grid_size();
  patch_embed_ = make_patch_embed(params_, init, spec_);
  pos_embed_ = params_.add("pos_embed", init.normal("pos_embed", {1, tokens, c}, 0.02));
  for (int i = 0; i < spec_.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i);
    Block b;
    b.norm1 = make_layer_norm(params_, p + ".norm1", c);
    b.attn = make_attention(params_, init, p + ".attn", c);
    b.norm2 = make_layer_norm(params_, p + ".norm2", c);
    b.mlp = make_mlp(params_, init, p + ".mlp", c, hidden);
    blocks_.push_back(std::move(b));
  }
  norm_ = make_layer_norm(params_, "norm", c);
  head_ = make_linear(params_, init, "head", c, spec_.n_outputs);
}

Tensor GlobalAttnNet::logits(const Tensor& batch) const {
  const Tensor grid = to_channels_last(patch_embed_(batch));  // [B, G, G, C]
  const auto b = grid.dim(0), c = grid.dim(3);
  Tensor x = add(reshape(grid, {b, grid.dim(1) * grid.dim(2), c}), pos_embed_);
  for (const auto& blk : blocks_) {
    x = add(x, multi_head_attention(blk.norm1(x), spec_.heads, blk.attn));
    x = add(x, blk.mlp(blk.norm2(x)));
  }
  return head_(reshape(mean(norm_(x), {1}), {b, c}));
}

// ---------------------------------------------------------------------------

std::unique_ptr<Model> build_model(const BackboneSpec& spec, std::uint64_t init_seed) {
  switch (spec.kind) {
    case BackboneKind::CONV_CBAM: return std::make_unique<ConvCbamNet>(spec, init_seed);
    case BackboneKind::LOCAL_ATTN: return std::make_unique<LocalAttnNet>(spec, init_seed);
    case BackboneKind::GLOBAL_ATTN: return std::make_unique<GlobalAttnNet>(spec, init_seed);
  }
  throw ContractError("unknown backbone kind");
}

ModelOutput forward(const Model& model, const Tensor& batch) {
  const auto s = model.spec().input_size;
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != s || batch.dim(3) != s) {
    throw ContractError("forward: expected [B, 3, " + std::to_string(s) + ", " + std::to_string(s) + "], got " +
                        tensor::to_string(batch.shape()));
  }
  std::optional<NoGradGuard> guard;
  if (!model.training()) guard.emplace();

  ModelOutput out;
  out.logits = model.logits(batch);
  out.batch = batch.dim(0);
  const auto n = out.logits.dim(1);
  const auto v = out.logits.values();
  out.probabilities.resize(static_cast<std::size_t>(out.batch * kBiomarkerOutputs));
  for (std::int64_t b = 0; b < out.batch; ++b) {
    for (int j = 0; j < kBiomarkerOutputs; ++j) {
      const double z = v[static_cast<std::size_t>(b * n + j)];
      out.probabilities[static_cast<std::size_t>(b * kBiomarkerOutputs + j)] = 1.0 / (1.0 + std::exp(-z));
    }
  }
  return out;
}

Tensor multilabel_loss(const Tensor& logits, const std::vector<double>& labels, const std::vector<double>& clinical) {
  if (logits.rank() != 2) throw ContractError("loss expects [B, n_outputs] logits");
  const auto b = logits.dim(0), n = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != b * kBiomarkerOutputs) {
    throw ContractError("loss: expected " + std::to_string(b * kBiomarkerOutputs) + " labels, got " +
                        std::to_string(labels.size()));
  }
  const Tensor bio = n == kBiomarkerOutputs ? logits : slice(logits, 1, 0, kBiomarkerOutputs);
  Tensor loss = bce_with_logits(bio, Tensor::from({b, kBiomarkerOutputs}, labels));
  if (n == kBiomarkerOutputs + kClinicalOutputs) {
    if (static_cast<std::int64_t>(clinical.size()) != b * kClinicalOutputs) {
      throw ContractError("loss: an 8-output model needs 2 clinical targets per sample");
    }
    loss = add(loss, mse(slice(logits, 1, kBiomarkerOutputs, kClinicalOutputs),
                         Tensor::from({b, kClinicalOutputs}, clinical)));
  } else if (n != kBiomarkerOutputs) {
    throw ContractError("loss: n_outputs must be 6 or 8");
  }
  return loss;
}

}  // namespace octbio::models
