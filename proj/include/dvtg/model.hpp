#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dvtg/ops.hpp"
#include "dvtg/optim.hpp"
#include "dvtg/sentence_encoder.hpp"
#include "dvtg/sgtm.hpp"
#include "dvtg/tensor.hpp"

namespace dvtg {

// Per-clip feature matrix of one video: [1 x C x D_c].
struct VideoClipFeatures {
  Tensor features;

  int clip_count() const { return features.dim(1); }
  int feature_dim() const { return features.dim(2); }

  static VideoClipFeatures from_rows(const std::vector<std::vector<double>>& rows);
};

// Network output: [1 x C x 2], class 0 = non-thumbnail, class 1 = thumbnail.
struct ClipScores {
  Tensor scores;

  int clip_count() const { return scores.dim(1); }
};

// Encoder-decoder shapes. Five conv/pool blocks halve the temporal axis each
// (total stride 32), two fc-style conv blocks keep it, and the two transposed
// convolutions bring it back up before the final crop.
struct ArchConfig {
  std::array<int, 5> block_channels{32, 64, 128, 256, 256};
  int convs_per_block = 2;
  int fc6_channels = 256;
  int fc7_channels = 256;
  int conv_kernel = 3;  // odd; applied with "same" zero padding
  int pool_size = 2;
  int pool_stride = 2;
  double dropout_p = 0.5;
  int deconv1_kernel = 4;
  int deconv1_stride = 2;
  int deconv2_kernel = 32;
  int deconv2_stride = 16;

  int encoder_stride() const;      // pool_stride^5
  int skip_stride() const;         // pool_stride^4
  void validate() const;

  // Scaled-down configuration used throughout the test and acceptance suites.
  static ArchConfig tiny();
};

enum class Variant {
  kFcsn,
  kInFcsn,
  kInFcsnConcat,
  kGuidedDvtg,
  kGuidedDvtgNa,
  kGuidedDvtgUnsup,
};

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::vector<Variant> all_variants();

// A variant plus the flags the pipeline derives from it.
struct VariantConfig {
  Variant variant = Variant::kGuidedDvtg;
  bool uses_sentence = false;        // any sentence input at all
  bool sentence_via_encoder = false; // self-attention encoder -> SGTM
  bool sentence_via_concat = false;  // mean embedding concatenated to clips
  bool has_modulation = false;       // normalization sites active
  ModulationMode modulation_mode = ModulationMode::kFixedIdentity;
  bool uses_aux_head = false;
  bool uses_thumb_loss = true;
  bool uses_aux_loss = false;

  static VariantConfig make(Variant v);

  // Ablation hook: fixed-identity instead of learned affine for the IN_*
  // variants. Rejects combinations the variant does not support.
  VariantConfig with_modulation_mode(ModulationMode mode) const;
};

// Everything a trained model carries: wiring flags, shapes, parameters.
struct Model {
  VariantConfig variant;
  ArchConfig arch;
  int feature_dim = 0;  // D_c
  int embed_dim = 0;    // D_w
  ModelParams params;

  static Model init(const VariantConfig& variant, const ArchConfig& arch,
                    int feature_dim, int embed_dim, Rng& rng);

  // Input channels the encoder sees (feature_dim, plus embed_dim for the
  // concat variant).
  int encoder_input_dim() const;
};

struct PadInfo {
  int original_len = 0;
  int padded_len = 0;
};

struct EncoderOutputs {
  Tensor enc_out;  // [1 x M7 x fc7_channels]
  Tensor skip4;    // [1 x M4 x block_channels[3]]
  PadInfo pad;
};

// Runs the encoder on a video. The input is zero-padded on the right to the
// next multiple of the encoder stride.
EncoderOutputs encode_video(const VideoClipFeatures& video, const Model& model,
                            bool training, Rng& rng);

// Decoder over (possibly modulated) encoder outputs. deconv2_out receives the
// pre-crop activation the aux head reads.
ClipScores decode_scores(const Tensor& enc_out, const Tensor& skip4,
                         const PadInfo& pad, const Model& model,
                         Tensor* deconv2_out = nullptr);

// Sentence-vector reconstruction from the pre-crop deconv2 activation.
Tensor aux_reconstruct(const Tensor& deconv2_out, const Model& model);

struct ForwardResult {
  ClipScores scores;
  Tensor z;      // defined iff the sentence encoder ran
  Tensor z_hat;  // defined iff the aux head ran
};

// Full variant-wired forward pass. sentence may be null for variants that do
// not consume one; passing one to such a variant is allowed and ignored.
ForwardResult forward(const Model& model, const VideoClipFeatures& video,
                      const SentenceTokens* sentence, bool training, Rng& rng);

}  // namespace dvtg
