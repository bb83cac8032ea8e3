#pragma once

#include <string>
#include <vector>

#include "dvtg/ops.hpp"
#include "dvtg/optim.hpp"
#include "dvtg/tensor.hpp"

namespace dvtg {

// Word-embedding matrix, one column per word: [D_w x N].
struct SentenceTokens {
  Tensor embeddings;

  int word_count() const { return embeddings.dim(1); }
  int embed_dim() const { return embeddings.dim(0); }

  static SentenceTokens from_columns(const std::vector<std::vector<double>>& words);
};

// Projection dim of the two attention feature maps: floor(D_w / 8), min 1.
int attention_inner_dim(int embed_dim);

// Weights of the self-attention block: two [d x D_w] feature maps and one
// [D_w x D_w] value map.
struct AttentionWeights {
  Tensor wf1;
  Tensor wf2;
  Tensor wh;

  // Uniform(-1/sqrt(D_w), +1/sqrt(D_w)) init.
  static AttentionWeights init(int embed_dim, Rng& rng);

  static AttentionWeights from_params(const ModelParams& params,
                                      const std::string& prefix);
  void register_params(ModelParams& params, const std::string& prefix) const;
};

// Non-local self-attention over the words. Attention weight of word i toward
// word j is softmax over i of f1(x_i)^T f2(x_j); output column j mixes the
// value-mapped words by those weights. Returns [D_w x N].
Tensor self_attention(const SentenceTokens& sentence, const AttentionWeights& w);

// Average pooling of the self-attended features -> sentence vector z [D_w].
Tensor encode_sentence(const SentenceTokens& sentence, const AttentionWeights& w);

}  // namespace dvtg
