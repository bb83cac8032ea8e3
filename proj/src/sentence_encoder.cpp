#include "dvtg/sentence_encoder.hpp"

#include <cmath>

#include "dvtg/errors.hpp"

namespace dvtg {

SentenceTokens SentenceTokens::from_columns(
    const std::vector<std::vector<double>>& words) {
  if (words.empty()) throw DataError("sentence must contain at least one word");
  const int n = static_cast<int>(words.size());
  const int dw = static_cast<int>(words[0].size());
  std::vector<double> data(static_cast<std::size_t>(dw) * n);
  for (int j = 0; j < n; ++j) {
    if (static_cast<int>(words[static_cast<std::size_t>(j)].size()) != dw) {
      throw DataError("word embedding dimensions differ within a sentence");
    }
    for (int i = 0; i < dw; ++i) {
      const double v = words[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      if (std::isnan(v)) throw DataError("NaN entry in word embedding");
      data[static_cast<std::size_t>(i * n + j)] = v;
    }
  }
  return {Tensor::from_data({dw, n}, std::move(data))};
}

int attention_inner_dim(int embed_dim) {
  return std::max(1, embed_dim / 8);
}

AttentionWeights AttentionWeights::init(int embed_dim, Rng& rng) {
  const int d = attention_inner_dim(embed_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  AttentionWeights w;
  w.wf1 = Tensor::uniform({d, embed_dim}, -bound, bound, rng, true);
  w.wf2 = Tensor::uniform({d, embed_dim}, -bound, bound, rng, true);
  w.wh = Tensor::uniform({embed_dim, embed_dim}, -bound, bound, rng, true);
  return w;
}

AttentionWeights AttentionWeights::from_params(const ModelParams& params,
                                               const std::string& prefix) {
  return {params.get(prefix + ".wf1"), params.get(prefix + ".wf2"),
          params.get(prefix + ".wh")};
}

void AttentionWeights::register_params(ModelParams& params,
                                       const std::string& prefix) const {
  params.add(prefix + ".wf1", wf1);
  params.add(prefix + ".wf2", wf2);
  params.add(prefix + ".wh", wh);
}

Tensor self_attention(const SentenceTokens& sentence, const AttentionWeights& w) {
  const Tensor& s = sentence.embeddings;
  if (!s.defined() || s.rank() != 2 || s.dim(1) < 1) {
    throw DataError("self_attention: sentence must be a D_w x N matrix with N >= 1");
  }
  Tensor f1 = matmul(w.wf1, s);  // [d x N]
  Tensor f2 = matmul(w.wf2, s);  // [d x N]
  Tensor h = matmul(w.wh, s);    // [D_w x N]

  // scores[i][j] = f1(x_i)^T f2(x_j); normalizing over i per column j gives
  // the mixing weights of column j.
  Tensor scores = matmul(transpose(f1), f2);  // [N x N]
  Tensor phi = softmax_cols(scores);
  return matmul(h, phi);  // [D_w x N]
}

Tensor encode_sentence(const SentenceTokens& sentence, const AttentionWeights& w) {
  return col_mean(self_attention(sentence, w));
}

}  // namespace dvtg
