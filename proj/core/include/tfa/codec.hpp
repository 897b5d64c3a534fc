#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "tfa/nn/layers.hpp"
#include "tfa/rng.hpp"

namespace tfa {

struct CodecConfig {
  int window = 5;
  int pmap_dim = 144;   // taxels per frame
  int wrench_dim = 6;
  int hidden = 256;     // encoder/decoder hidden width, two hidden layers
  int code_dim = 64;    // latent width per modality
  int k_pmap = 32;
  int k_wrench = 32;
  double beta = 0.25;   // commitment weight
  bool shared_codebook = false;  // ablation: one book of size k_pmap+k_wrench
  int dead_code_steps = 500;     // revival threshold

  int pmap_in() const { return window * pmap_dim; }
  int wrench_in() const { return window * wrench_dim; }
};

/// Learnable codeword table plus the usage statistics that drive the
/// collapse diagnostics and dead-code revival.
struct Codebook {
  nn::Var words;  // K x d leaf
  std::vector<std::uint64_t> usage;
  std::vector<int> idle;

  int size() const { return static_cast<int>(words->val.rows()); }
  int dim() const { return static_cast<int>(words->val.cols()); }
};

Codebook make_codebook(const Eigen::MatrixXd& words);

/// Nearest row by Euclidean distance; ties break to the lowest index.
int nearest_code(const Eigen::MatrixXd& words, const Eigen::VectorXd& z);

/// Nearest-neighbor lookup that also increments the code's usage count.
struct QuantResult {
  int index = 0;
  Eigen::VectorXd codeword;
};
QuantResult quantize(Codebook& book, const Eigen::VectorXd& z);

/// exp(entropy) of the empirical usage distribution; in [1, K].
double codebook_perplexity(const Codebook& book);

/// Seeded k-means++ with a fixed number of Lloyd iterations. Falls back to
/// unit-scale random rows when the points carry fewer than k distinct rows.
Eigen::MatrixXd kmeans_rows(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                            int iterations = 10);

/// The selected codeword pair for one window.
struct QuantizedForceCode {
  Eigen::VectorXd code_pmap;
  Eigen::VectorXd code_wrench;
  int idx_pmap = 0;
  int idx_wrench = 0;
  Eigen::VectorXd concat;
};

struct ForceCodec {
  CodecConfig cfg;
  nn::Mlp enc_pmap, enc_wrench;
  nn::Mlp dec_pmap, dec_wrench;
  Codebook book_pmap;    // in shared mode this is the single shared book
  Codebook book_wrench;  // unused in shared mode
  bool books_ready = false;

  // Ring buffers of recent encoder outputs, feeding dead-code revival.
  std::vector<Eigen::VectorXd> recent_pmap, recent_wrench;
  int recent_next = 0;

  nn::ParamMap params() const;
};

ForceCodec make_force_codec(const CodecConfig& cfg, std::uint64_t seed);

/// k-means initialization of both codebooks from the first batch's latents.
void init_codebooks(ForceCodec& codec, const Eigen::MatrixXd& z_pmap,
                    const Eigen::MatrixXd& z_wrench, std::uint64_t seed);

/// Differentiable batch pass. Inputs are normalized flattened windows
/// (rows = batch). Losses are batch means of the per-window sums.
struct CodecForward {
  nn::Var z_pmap, z_wrench;      // encoder latents
  std::vector<int> idx_pmap, idx_wrench;
  nn::Var code_st;               // straight-through concat codes, B x (2*code_dim)
  nn::Var quant_loss;
  nn::Var recon_loss;
};
CodecForward codec_forward(ForceCodec& codec, const Eigen::MatrixXd& x_pmap,
                           const Eigen::MatrixXd& x_wrench, bool update_usage);

/// Reseeds codewords that have been idle for cfg.dead_code_steps steps to a
/// random recent latent. Call once per optimizer step.
void revive_dead_codes(ForceCodec& codec, Rng& rng);

QuantizedForceCode encode_and_quantize(ForceCodec& codec, const Eigen::VectorXd& x_pmap,
                                       const Eigen::VectorXd& x_wrench, bool update_usage);

/// Decoded (pressure sequence, wrench sequence) for a codeword pair.
std::pair<Eigen::VectorXd, Eigen::VectorXd> decode_force_window(const ForceCodec& codec,
                                                                const Eigen::VectorXd& code_pmap,
                                                                const Eigen::VectorXd& code_wrench);

}  // namespace tfa
