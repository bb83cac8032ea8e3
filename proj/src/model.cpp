#include "dvtg/model.hpp"

#include <cmath>

#include "dvtg/errors.hpp"

namespace dvtg {

VideoClipFeatures VideoClipFeatures::from_rows(
    const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DataError("video must contain at least one clip");
  const int c = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows[0].size());
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(c) * d);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != d) {
      throw DataError("clip feature dimensions differ within a video");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw DataError("non-finite clip feature value");
      data.push_back(v);
    }
  }
  return {Tensor::from_data({1, c, d}, std::move(data))};
}

int ArchConfig::encoder_stride() const {
  int s = 1;
  for (int i = 0; i < 5; ++i) s *= pool_stride;
  return s;
}

int ArchConfig::skip_stride() const {
  int s = 1;
  for (int i = 0; i < 4; ++i) s *= pool_stride;
  return s;
}

void ArchConfig::validate() const {
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw DataError("conv_kernel must be odd for same-length convolutions, got " +
                    std::to_string(conv_kernel));
  }
  for (int c : block_channels) {
    if (c < 1) throw DataError("block channel counts must be positive");
  }
  if (convs_per_block < 1) throw DataError("convs_per_block must be >= 1");
  if (fc6_channels < 1 || fc7_channels < 1) {
    throw DataError("fc6/fc7 channel counts must be positive");
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw DataError("dropout_p must be in [0, 1)");
  }
  if (pool_size < 1 || pool_stride < 1) {
    throw DataError("pool size/stride must be >= 1");
  }
  if (deconv1_kernel < deconv1_stride || deconv2_kernel < deconv2_stride) {
    throw DataError("deconv kernels must be >= their strides");
  }
  if ((deconv1_kernel - deconv1_stride) % 2 != 0) {
    throw DataError("deconv1 kernel/stride overhang must be even for centered fusion");
  }
  if (deconv1_stride * deconv2_stride != encoder_stride()) {
    throw DataError("deconv strides must multiply back to the encoder stride " +
                    std::to_string(encoder_stride()));
  }
}

ArchConfig ArchConfig::tiny() {
  ArchConfig cfg;
  cfg.block_channels = {4, 4, 4, 4, 4};
  cfg.fc6_channels = 4;
  cfg.fc7_channels = 4;
  return cfg;
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kFcsn: return "fcsn";
    case Variant::kInFcsn: return "in_fcsn";
    case Variant::kInFcsnConcat: return "in_fcsn_concat";
    case Variant::kGuidedDvtg: return "guided_dvtg";
    case Variant::kGuidedDvtgNa: return "guided_dvtg_na";
    case Variant::kGuidedDvtgUnsup: return "guided_dvtg_unsup";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (Variant v : all_variants()) {
    if (s == to_string(v)) return v;
  }
  throw DataError("unknown variant '" + s + "'");
}

std::vector<Variant> all_variants() {
  return {Variant::kFcsn,       Variant::kInFcsn,      Variant::kInFcsnConcat,
          Variant::kGuidedDvtg, Variant::kGuidedDvtgNa, Variant::kGuidedDvtgUnsup};
}

VariantConfig VariantConfig::make(Variant v) {
  VariantConfig c;
  c.variant = v;
  switch (v) {
    case Variant::kFcsn:
      break;
    case Variant::kInFcsn:
      c.has_modulation = true;
      c.modulation_mode = ModulationMode::kLearned;
      break;
    case Variant::kInFcsnConcat:
      c.uses_sentence = true;
      c.sentence_via_concat = true;
      c.has_modulation = true;
      c.modulation_mode = ModulationMode::kLearned;
      break;
    case Variant::kGuidedDvtg:
      c.uses_sentence = true;
      c.sentence_via_encoder = true;
      c.has_modulation = true;
      c.modulation_mode = ModulationMode::kPredicted;
      c.uses_aux_head = true;
      c.uses_aux_loss = true;
      break;
    case Variant::kGuidedDvtgNa:
      c.uses_sentence = true;
      c.sentence_via_encoder = true;
      c.has_modulation = true;
      c.modulation_mode = ModulationMode::kPredicted;
      break;
    case Variant::kGuidedDvtgUnsup:
      c.uses_sentence = true;
      c.sentence_via_encoder = true;
      c.has_modulation = true;
      c.modulation_mode = ModulationMode::kPredicted;
      c.uses_aux_head = true;
      c.uses_thumb_loss = false;
      c.uses_aux_loss = true;
      break;
  }
  return c;
}

VariantConfig VariantConfig::with_modulation_mode(ModulationMode mode) const {
  if (!has_modulation) {
    throw UsageError("variant " + std::string(to_string(variant)) +
                     " has no modulation sites");
  }
  if (sentence_via_encoder && mode != ModulationMode::kPredicted) {
    throw UsageError("sentence-guided variants require predicted modulation");
  }
  if (!sentence_via_encoder && mode == ModulationMode::kPredicted) {
    throw UsageError("predicted modulation requires the sentence encoder");
  }
  VariantConfig c = *this;
  c.modulation_mode = mode;
  return c;
}

int Model::encoder_input_dim() const {
  return feature_dim + (variant.sentence_via_concat ? embed_dim : 0);
}

namespace {

Tensor conv_weight_init(int k, int cin, int cout, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(k * cin));
  return Tensor::uniform({k, cin, cout}, -bound, bound, rng, true);
}

Tensor deconv_weight_init(int k, int cout, int cin, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(k * cin));
  return Tensor::uniform({k, cout, cin}, -bound, bound, rng, true);
}

void add_conv(ModelParams& p, const std::string& name, int k, int cin, int cout,
              Rng& rng) {
  p.add(name + ".weight", conv_weight_init(k, cin, cout, rng));
  p.add(name + ".bias", Tensor::zeros({cout}, true));
}

}  // namespace

Model Model::init(const VariantConfig& variant, const ArchConfig& arch,
                  int feature_dim, int embed_dim, Rng& rng) {
  arch.validate();
  if (feature_dim < 1) throw DataError("feature_dim must be >= 1");
  if (variant.uses_sentence && embed_dim < 1) {
    throw DataError("sentence-consuming variants need embed_dim >= 1");
  }

  Model m;
  m.variant = variant;
  m.arch = arch;
  m.feature_dim = feature_dim;
  m.embed_dim = embed_dim;

  const int k = arch.conv_kernel;
  int cin = m.encoder_input_dim();
  for (int b = 0; b < 5; ++b) {
    const int cout = arch.block_channels[static_cast<std::size_t>(b)];
    for (int j = 0; j < arch.convs_per_block; ++j) {
      add_conv(m.params, "enc.block" + std::to_string(b + 1) + ".conv" + std::to_string(j),
               k, j == 0 ? cin : cout, cout, rng);
    }
    cin = cout;
  }
  add_conv(m.params, "enc.fc6", k, cin, arch.fc6_channels, rng);
  add_conv(m.params, "enc.fc7", k, arch.fc6_channels, arch.fc7_channels, rng);

  const int f7 = arch.fc7_channels;
  const int f4 = arch.block_channels[3];
  add_conv(m.params, "dec.score", 1, f7, 2, rng);
  add_conv(m.params, "dec.skip", 1, f4, 2, rng);
  m.params.add("dec.deconv1.weight",
               deconv_weight_init(arch.deconv1_kernel, 2, 2, rng));
  m.params.add("dec.deconv1.bias", Tensor::zeros({2}, true));
  m.params.add("dec.deconv2.weight",
               deconv_weight_init(arch.deconv2_kernel, 2, 2, rng));
  m.params.add("dec.deconv2.bias", Tensor::zeros({2}, true));

  if (variant.uses_aux_head) {
    add_conv(m.params, "aux.conv", 1, 2, embed_dim, rng);
  }
  if (variant.sentence_via_encoder) {
    AttentionWeights::init(embed_dim, rng).register_params(m.params, "senc");
  }
  if (variant.has_modulation) {
    switch (variant.modulation_mode) {
      case ModulationMode::kPredicted:
        init_modulation_head(m.params, "sgtm.site1", embed_dim, f7);
        init_modulation_head(m.params, "sgtm.site2", embed_dim, f4);
        break;
      case ModulationMode::kLearned:
        init_learned_modulation(m.params, "sgtm.site1", f7);
        init_learned_modulation(m.params, "sgtm.site2", f4);
        break;
      case ModulationMode::kFixedIdentity:
        break;
    }
  }
  return m;
}

namespace {

// Right-zero-pad the clip axis up to a multiple of the encoder stride.
Tensor pad_temporal(const Tensor& map, int padded_len) {
  const int L = map.dim(1);
  const int C = map.dim(2);
  if (padded_len == L) return map;
  std::vector<double> data(static_cast<std::size_t>(padded_len) * C, 0.0);
  std::copy(map.data().begin(), map.data().end(), data.begin());
  return Tensor::from_data({1, padded_len, C}, std::move(data));
}

Tensor conv_block(const Tensor& x, const Model& model, const std::string& name,
                  int padding) {
  return conv1d(x, model.params.get(name + ".weight"),
                model.params.get(name + ".bias"), 1, padding);
}

EncoderOutputs encode_map(const Tensor& input_map, const Model& model,
                          bool training, Rng& rng) {
  const ArchConfig& arch = model.arch;
  const int stride = arch.encoder_stride();
  const int orig = input_map.dim(1);
  const int padded = ((orig + stride - 1) / stride) * stride;

  Tensor x = pad_temporal(input_map, padded);
  const int same_pad = (arch.conv_kernel - 1) / 2;

  Tensor skip4;
  for (int b = 0; b < 5; ++b) {
    for (int j = 0; j < arch.convs_per_block; ++j) {
      x = relu(conv_block(x, model,
                          "enc.block" + std::to_string(b + 1) + ".conv" + std::to_string(j),
                          same_pad));
    }
    x = max_pool1d(x, arch.pool_size, arch.pool_stride);
    if (b == 3) skip4 = x;
  }
  x = dropout(relu(conv_block(x, model, "enc.fc6", same_pad)), arch.dropout_p,
              training, rng);
  x = dropout(relu(conv_block(x, model, "enc.fc7", same_pad)), arch.dropout_p,
              training, rng);

  return {x, skip4, PadInfo{orig, padded}};
}

}  // namespace

EncoderOutputs encode_video(const VideoClipFeatures& video, const Model& model,
                            bool training, Rng& rng) {
  if (video.feature_dim() != model.encoder_input_dim()) {
    throw ShapeError("encoder expects " + std::to_string(model.encoder_input_dim()) +
                     " input channels, video has " +
                     std::to_string(video.feature_dim()));
  }
  return encode_map(video.features, model, training, rng);
}

ClipScores decode_scores(const Tensor& enc_out, const Tensor& skip4,
                         const PadInfo& pad, const Model& model,
                         Tensor* deconv2_out) {
  const ArchConfig& arch = model.arch;

  Tensor score = conv1d(enc_out, model.params.get("dec.score.weight"),
                        model.params.get("dec.score.bias"));
  Tensor up = transposed_conv1d(score, model.params.get("dec.deconv1.weight"),
                                model.params.get("dec.deconv1.bias"),
                                arch.deconv1_stride);
  // The transposed conv overshoots by kernel - stride; trim symmetrically so
  // the upsampled map aligns with the skip connection.
  const int overhang = arch.deconv1_kernel - arch.deconv1_stride;
  if (overhang > 0) up = crop(up, up.dim(1) - overhang, overhang / 2);

  Tensor skip_score = conv1d(skip4, model.params.get("dec.skip.weight"),
                             model.params.get("dec.skip.bias"));
  if (up.dim(1) != skip_score.dim(1)) {
    throw ShapeError("decoder fusion length mismatch: " + std::to_string(up.dim(1)) +
                     " vs " + std::to_string(skip_score.dim(1)));
  }
  Tensor fused = add(up, skip_score);

  Tensor full = transposed_conv1d(fused, model.params.get("dec.deconv2.weight"),
                                  model.params.get("dec.deconv2.bias"),
                                  arch.deconv2_stride);
  if (deconv2_out) *deconv2_out = full;

  const int offset = (full.dim(1) - pad.original_len) / 2;
  if (offset < 0) {
    throw ShapeError("decoder output shorter than the video: " +
                     std::to_string(full.dim(1)) + " < " +
                     std::to_string(pad.original_len));
  }
  return {crop(full, pad.original_len, offset)};
}

Tensor aux_reconstruct(const Tensor& deconv2_out, const Model& model) {
  Tensor mapped = conv1d(deconv2_out, model.params.get("aux.conv.weight"),
                         model.params.get("aux.conv.bias"));
  return temporal_mean(mapped);
}

namespace {

Tensor mean_embedding(const SentenceTokens& sentence) {
  Tensor cols = sentence.embeddings;  // [D_w x N]
  const int dw = cols.dim(0);
  const int n = cols.dim(1);
  std::vector<double> mean(static_cast<std::size_t>(dw), 0.0);
  for (int i = 0; i < dw; ++i) {
    for (int j = 0; j < n; ++j) {
      mean[static_cast<std::size_t>(i)] += cols.at(static_cast<std::size_t>(i * n + j));
    }
  }
  for (double& v : mean) v /= n;
  return Tensor::from_data({dw}, std::move(mean));
}

Tensor concat_channels(const Tensor& map, const Tensor& extra) {
  const int L = map.dim(1);
  const int c0 = map.dim(2);
  const int c1 = extra.dim(0);
  std::vector<double> data(static_cast<std::size_t>(L) * (c0 + c1));
  for (int t = 0; t < L; ++t) {
    for (int c = 0; c < c0; ++c) {
      data[static_cast<std::size_t>(t * (c0 + c1) + c)] =
          map.at(static_cast<std::size_t>(t * c0 + c));
    }
    for (int c = 0; c < c1; ++c) {
      data[static_cast<std::size_t>(t * (c0 + c1) + c0 + c)] =
          extra.at(static_cast<std::size_t>(c));
    }
  }
  return Tensor::from_data({1, L, c0 + c1}, std::move(data));
}

ModulationParams site_modulation(const Model& model, const std::string& site,
                                 int channels, const Tensor& z) {
  switch (model.variant.modulation_mode) {
    case ModulationMode::kFixedIdentity:
      return {Tensor::full({channels}, 1.0), Tensor::zeros({channels})};
    case ModulationMode::kLearned:
      return {model.params.get(site + ".alpha"), model.params.get(site + ".beta")};
    case ModulationMode::kPredicted:
      return predict_modulation(z, model.params.get(site + ".fc.weight"),
                                model.params.get(site + ".fc.bias"));
  }
  throw DataError("unreachable modulation mode");
}

}  // namespace

ForwardResult forward(const Model& model, const VideoClipFeatures& video,
                      const SentenceTokens* sentence, bool training, Rng& rng) {
  const VariantConfig& vc = model.variant;
  if (vc.uses_sentence && sentence == nullptr) {
    throw UsageError("variant " + std::string(to_string(vc.variant)) +
                     " requires a sentence");
  }
  if (video.feature_dim() != model.feature_dim) {
    throw ShapeError("model expects clip features of dim " +
                     std::to_string(model.feature_dim) + ", got " +
                     std::to_string(video.feature_dim()));
  }

  Tensor input_map = video.features;
  if (vc.sentence_via_concat) {
    input_map = concat_channels(input_map, mean_embedding(*sentence));
  }

  EncoderOutputs enc = encode_map(input_map, model, training, rng);

  ForwardResult result;
  Tensor site1 = enc.enc_out;
  Tensor site2 = enc.skip4;
  if (vc.has_modulation) {
    Tensor z;
    if (vc.modulation_mode == ModulationMode::kPredicted) {
      z = encode_sentence(*sentence, AttentionWeights::from_params(model.params, "senc"));
      result.z = z;
    }
    site1 = apply_sgtm(site1, site_modulation(model, "sgtm.site1",
                                              model.arch.fc7_channels, z));
    site2 = apply_sgtm(site2, site_modulation(model, "sgtm.site2",
                                              model.arch.block_channels[3], z));
  }

  Tensor deconv2_out;
  result.scores = decode_scores(site1, site2, enc.pad, model, &deconv2_out);
  if (vc.uses_aux_head) {
    result.z_hat = aux_reconstruct(deconv2_out, model);
  }
  return result;
}

}  // namespace dvtg
