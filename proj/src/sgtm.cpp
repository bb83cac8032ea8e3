#include "dvtg/sgtm.hpp"

#include "dvtg/errors.hpp"

namespace dvtg {

const char* to_string(ModulationMode mode) {
  switch (mode) {
    case ModulationMode::kFixedIdentity: return "fixed_identity";
    case ModulationMode::kLearned: return "learned";
    case ModulationMode::kPredicted: return "predicted";
  }
  return "?";
}

ModulationMode modulation_mode_from_string(const std::string& s) {
  if (s == "fixed_identity") return ModulationMode::kFixedIdentity;
  if (s == "learned") return ModulationMode::kLearned;
  if (s == "predicted") return ModulationMode::kPredicted;
  throw DataError("unknown modulation mode '" + s + "'");
}

ModulationParams predict_modulation(const Tensor& z, const Tensor& fc_weight,
                                    const Tensor& fc_bias) {
  if (fc_bias.dim(0) % 2 != 0) {
    throw ShapeError("modulation FC must produce an even-length vector, got " +
                     std::to_string(fc_bias.dim(0)));
  }
  const int channels = fc_bias.dim(0) / 2;
  Tensor out = linear(z, fc_weight, fc_bias);
  return {slice_vec(out, 0, channels), slice_vec(out, channels, channels)};
}

void init_modulation_head(ModelParams& params, const std::string& prefix,
                          int embed_dim, int channels) {
  params.add(prefix + ".fc.weight",
             Tensor::zeros({embed_dim, 2 * channels}, true));
  std::vector<double> bias(static_cast<std::size_t>(2 * channels), 0.0);
  for (int c = 0; c < channels; ++c) bias[static_cast<std::size_t>(c)] = 1.0;
  params.add(prefix + ".fc.bias",
             Tensor::from_data({2 * channels}, std::move(bias), true));
}

void init_learned_modulation(ModelParams& params, const std::string& prefix,
                             int channels) {
  params.add(prefix + ".alpha", Tensor::full({channels}, 1.0, true));
  params.add(prefix + ".beta", Tensor::zeros({channels}, true));
}

Tensor apply_sgtm(const Tensor& activations, const ModulationParams& mp) {
  if (mp.alpha.shape() != mp.beta.shape()) {
    throw ShapeError("modulation alpha/beta lengths differ: " +
                     shape_str(mp.alpha.shape()) + " vs " +
                     shape_str(mp.beta.shape()));
  }
  auto [mu, sigma] = temporal_stats(activations);
  Tensor normalized = div_channel(sub_channel(activations, mu), sigma);
  return add_channel(mul_channel(normalized, mp.alpha), mp.beta);
}

}  // namespace dvtg
