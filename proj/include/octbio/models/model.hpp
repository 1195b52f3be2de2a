#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "octbio/models/attention.hpp"
#include "octbio/models/cbam.hpp"
#include "octbio/models/layers.hpp"

namespace octbio::models {

enum class BackboneKind { CONV_CBAM, LOCAL_ATTN, GLOBAL_ATTN };

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(const std::string& text);

inline constexpr int kBiomarkerOutputs = 6;
inline constexpr int kClinicalOutputs = 2;

struct BackboneSpec {
  BackboneKind kind = BackboneKind::CONV_CBAM;
  int input_size = 64;
  int width = 16;
  int depth = 2;        // convs per stage (CONV_CBAM) or blocks (attention kinds)
  int window = 4;       // LOCAL_ATTN
  int heads = 2;        // attention kinds
  int patch = 8;        // patch-embedding stride (attention kinds)
  int mlp_ratio = 2;
  int n_outputs = 6;    // 6 biomarkers, or 8 with the two clinical targets
  bool use_cbam = true; // CONV_CBAM
  int cbam_reduction = 16;
  int cbam_kernel = 7;

  void validate() const;
  // Side of the token grid for attention kinds.
  int grid_size() const { return input_size / patch; }

  nlohmann::ordered_json to_json() const;
  static BackboneSpec from_json(const nlohmann::ordered_json& j);
  bool operator==(const BackboneSpec&) const = default;
};

struct ModelOutput {
  Tensor logits;                     // [B, n_outputs]
  std::vector<double> probabilities; // B x 6, row-major
  std::int64_t batch = 0;

  double probability(std::int64_t b, int j) const {
    return probabilities[static_cast<std::size_t>(b * kBiomarkerOutputs + j)];
  }
};

class Model {
 public:
  explicit Model(BackboneSpec spec) : spec_(std::move(spec)) {}
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const BackboneSpec& spec() const { return spec_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  // batch: [B, 3, S, S] -> [B, n_outputs].
  virtual Tensor logits(const Tensor& batch) const = 0;

 protected:
  BackboneSpec spec_;
  ParameterSet params_;
  bool training_ = false;
};

class ConvCbamNet final : public Model {
 public:
  ConvCbamNet(BackboneSpec spec, std::uint64_t init_seed);
  Tensor logits(const Tensor& batch) const override;

  static constexpr const char* kStageNames[3] = {"stem", "reduction_a", "reduction_b"};
  int stage_channels(int stage) const { return spec_.width << stage; }
  CbamParams cbam_params(int stage) const;

  void set_cbam_gates(CbamGates g) { gates_ = g; }
  CbamGates cbam_gates() const { return gates_; }

 private:
  std::vector<std::vector<Conv2d>> stages_;
  std::vector<CbamWeights> cbam_;
  Linear head_;
  CbamGates gates_ = CbamGates::Learned;
};

class LocalAttnNet final : public Model {
 public:
  LocalAttnNet(BackboneSpec spec, std::uint64_t init_seed);
  Tensor logits(const Tensor& batch) const override;

 private:
  struct Block {
    Conv2d expand, depthwise, project;  // MBConv: 1x1 up, 3x3 depthwise, 1x1 down
    LayerNorm norm_block, norm_mlp1, norm_grid, norm_mlp2;
    AttentionWeights block_attn, grid_attn;
    Mlp mlp1, mlp2;
  };
  // Convolutional stem: 3x3 stride 2, 3x3 stride 1 (GELU after each), then a
  // patch/2 stride patch/2 projection to tokens.
  Conv2d stem1_, stem2_, stem_proj_;
  std::vector<Block> blocks_;
  LayerNorm norm_;
  Linear head_;
};

class GlobalAttnNet final : public Model {
 public:
  GlobalAttnNet(BackboneSpec spec, std::uint64_t init_seed);
  Tensor logits(const Tensor& batch) const override;

 private:
  struct Block {
    LayerNorm norm1, norm2;
    AttentionWeights attn;
    Mlp mlp;
  };
  Conv2d patch_embed_;
  Tensor pos_embed_;  // [1, T, C]
  std::vector<Block> blocks_;
  LayerNorm norm_;
  Linear head_;
};

std::unique_ptr<Model> build_model(const BackboneSpec& spec, std::uint64_t init_seed);

// Validates the input size; runs without autograd history in eval mode.
ModelOutput forward(const Model& model, const Tensor& batch);

// Mean BCE over the 6 biomarker logits plus, for 8-output models, MSE over
// the 2 clinical outputs (1:1). labels: B x 6 in {0,1}; clinical: B x 2 or empty.
Tensor multilabel_loss(const Tensor& logits, const std::vector<double>& labels,
                       const std::vector<double>& clinical = {});

}  // namespace octbio::models
