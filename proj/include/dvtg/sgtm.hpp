#pragma once

#include <string>

#include "dvtg/ops.hpp"
#include "dvtg/optim.hpp"
#include "dvtg/tensor.hpp"

namespace dvtg {

// How the per-channel affine parameters of the modulation are obtained.
enum class ModulationMode {
  kFixedIdentity,  // alpha = 1, beta = 0, nothing trainable
  kLearned,        // alpha*, beta* are free parameters
  kPredicted,      // alpha^s, beta^s predicted from the sentence vector
};

const char* to_string(ModulationMode mode);
ModulationMode modulation_mode_from_string(const std::string& s);

// Per-channel scale and shift applied after temporal normalization.
struct ModulationParams {
  Tensor alpha;
  Tensor beta;
};

// Splits the output of an FC head on z into (alpha | beta). fc_weight is
// [D_w x 2*C_ch], fc_bias is [2*C_ch]; the first C_ch entries become alpha.
ModulationParams predict_modulation(const Tensor& z, const Tensor& fc_weight,
                                    const Tensor& fc_bias);

// FC head initialized so the modulation starts as the identity: weights are
// zero and the bias is (1,...,1 | 0,...,0).
void init_modulation_head(ModelParams& params, const std::string& prefix,
                          int embed_dim, int channels);

// Learned alpha/beta initialized to the identity (1, 0).
void init_learned_modulation(ModelParams& params, const std::string& prefix,
                             int channels);

// Normalizes each channel over time to zero mean / unit variance and applies
// the affine transform: alpha_c * (A - mu_c) / sigma_c + beta_c. The same
// (alpha_c, beta_c) applies at every temporal position.
Tensor apply_sgtm(const Tensor& activations, const ModulationParams& mp);

}  // namespace dvtg
