#ifndef VPPNET_NEURAL_HPP
#define VPPNET_NEURAL_HPP

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "vppnet/core.hpp"

namespace vppnet {

/// Feature/output scale in kW. Inputs are divided by this before entering
/// the network and raw head outputs multiplied by it, keeping activations
/// O(1) over the data's capability range.
inline constexpr double kFeatureScaleKw = 25.0;

struct HyperParams {
  int d_in = 2;      ///< input features per agent (p_cap, p_dem)
  int d_h = 64;      ///< hidden width
  int n_blocks = 1;  ///< attention blocks
  int d_out = 1;     ///< outputs per agent

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

/// Single attention block: query/key/value/output projections plus a
/// two-layer position-wise feed-forward, all with biases. Residual
/// connections around both sub-layers, no layer normalization.
struct AttentionBlockParams {
  Eigen::MatrixXd w_query, w_key, w_value, w_out;  // d_h x d_h
  Eigen::VectorXd b_query, b_key, b_value, b_out;  // d_h
  Eigen::MatrixXd w_ffn1, w_ffn2;                  // d_h x d_h
  Eigen::VectorXd b_ffn1, b_ffn2;                  // d_h
};

/// All learnable weights: two-layer embedding (d_in -> d_h -> d_h, tanh),
/// n_blocks attention blocks, and a linear head (d_h -> d_out). There is no
/// positional encoding anywhere, which is what makes the network
/// permutation-equivariant.
struct ModelParams {
  HyperParams hyper;
  Eigen::MatrixXd w_embed1;  // d_in x d_h
  Eigen::VectorXd b_embed1;  // d_h
  Eigen::MatrixXd w_embed2;  // d_h x d_h
  Eigen::VectorXd b_embed2;  // d_h
  std::vector<AttentionBlockParams> blocks;
  Eigen::MatrixXd w_head;  // d_h x d_out
  Eigen::VectorXd b_head;  // d_out

  /// All-zero parameters with the shapes implied by hyper.
  static ModelParams zeros(const HyperParams& hyper);

  std::size_t n_params() const;

  /// Flat view of all parameters in a fixed order (embedding, blocks in
  /// order, head; matrices column-major). Basis for the optimizer state and
  /// finite-difference probes.
  Eigen::VectorXd to_flat() const;
  static ModelParams from_flat(const HyperParams& hyper,
                               const Eigen::VectorXd& flat);
};

/// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases.
/// Bitwise deterministic given the seed.
ModelParams init_params(const HyperParams& hyper, std::uint64_t seed);

/// Per-agent normalized features [p_cap, p_dem] / kFeatureScaleKw, one row
/// per agent in instance order.
Eigen::MatrixXd normalize_inputs(const ProblemInstance& instance);

/// Intermediates of one forward evaluation, as needed by backward().
struct ForwardCache {
  bool valid = false;
  HyperParams hyper;
  int n_agents = 0;
  Eigen::MatrixXd inputs;     // N x d_in
  Eigen::MatrixXd embed_mid;  // N x d_h, after first tanh layer
  Eigen::MatrixXd embed_out;  // N x d_h
  struct BlockCache {
    Eigen::MatrixXd input;      // N x d_h
    Eigen::MatrixXd query, key, value;
    Eigen::MatrixXd attn;       // N x N softmax weights
    Eigen::MatrixXd mixed;      // N x d_h, attn * value
    Eigen::MatrixXd post_attn;  // N x d_h, after residual
    Eigen::MatrixXd ffn_mid;    // N x d_h, after tanh
    Eigen::MatrixXd output;     // N x d_h, after second residual
  };
  std::vector<BlockCache> blocks;
};

/// Virtual prediction v in kW, one entry per agent: embedding, n_blocks of
/// (softmax self-attention + residual, feed-forward + residual), linear head,
/// then rescaling by kFeatureScaleKw. Exactly permutation-equivariant up to
/// float reassociation; defined for any N >= 1. Pass a cache to enable
/// backward(). Throws NumericError (naming the block) on non-finite
/// intermediates.
DecisionVector forward(const ModelParams& params,
                       const ProblemInstance& instance,
                       ForwardCache* cache = nullptr);

/// Reverse-mode gradients of a scalar loss with respect to every parameter,
/// given dL/dv from downstream. Requires the cache produced by the matching
/// forward call; a missing or mismatched cache throws.
ModelParams backward(const ModelParams& params, const ForwardCache& cache,
                     const DecisionVector& upstream);

/// Versioned self-describing checkpoint: hyperparameters plus every weight
/// tensor with explicit shape. save -> load round-trips bitwise.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& metadata);
std::pair<ModelParams, std::string> load_checkpoint(const std::string& path);

}  // namespace vppnet

#endif  // VPPNET_NEURAL_HPP
