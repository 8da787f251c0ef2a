#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tsr/graph.hpp"
#include "tsr/types.hpp"

namespace tsr {

constexpr int kClassCount = 3;  // Vertical, Horizontal, NoRelation
constexpr double kLayerNormEps = 1e-5;

// Training recipe defaults. class_weights are indexed by RelationLabel;
// the reduced NoRelation weight compensates for candidate graphs being
// dominated by unrelated pairs.
struct HyperParams {
  int blocks = 4;       // attention blocks per stream
  int dim = 64;         // width of vertex/edge representations
  int ffn_dim = 256;    // hidden width of the per-block feed-forward net
  double learning_rate = 0.0005;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0001;  // classic L2, added to gradients
  double dropout = 0.4;
  std::array<double, 3> class_weights = {1.0, 1.0, 0.2};
  int epochs = 15;
  int k = 20;  // nearest neighbors for graph construction

  bool operator==(const HyperParams&) const = default;
};

// Parameters of one attention block: scaled dot-product attention over
// neighbors, residual + layer norm, position-wise feed-forward net,
// residual + layer norm.
struct BlockParams {
  Eigen::MatrixXd attn_query, attn_key, attn_value;  // d x d
  Eigen::VectorXd norm1_gain, norm1_bias;            // d
  Eigen::MatrixXd ffn_w1;                            // d x ffn_dim
  Eigen::VectorXd ffn_b1;                            // ffn_dim
  Eigen::MatrixXd ffn_w2;                            // ffn_dim x d
  Eigen::VectorXd ffn_b2;                            // d
  Eigen::VectorXd norm2_gain, norm2_bias;            // d
};

struct ModelParams {
  HyperParams hyper;
  Eigen::MatrixXd embed_v;  // kVertexFeatureCount x d
  Eigen::MatrixXd embed_e;  // kEdgeFeatureCount x d
  std::vector<BlockParams> vertex_stream;  // blocks updating vertex states
  std::vector<BlockParams> edge_stream;    // blocks updating edge states
  Eigen::MatrixXd cls_w;    // d x kClassCount
  Eigen::VectorXd cls_b;    // kClassCount
};

// Flat views over every tensor, in a fixed documented order (embeddings,
// then per block vertex/edge stream tensors, then the classifier). The
// same order is used by the optimizer and the checkpoint format.
struct TensorView {
  std::string name;
  const double* data;
  long rows, cols;
  long size() const { return rows * cols; }
};
struct TensorRef {
  std::string name;
  double* data;
  long rows, cols;
  long size() const { return rows * cols; }
};
std::vector<TensorView> tensor_views(const ModelParams& params);
std::vector<TensorRef> tensor_refs(ModelParams& params);

// All-zero parameters with the shapes implied by hyper.
ModelParams make_params(const HyperParams& hyper);

// Seeded symmetric-uniform init: weight matrices get
// U(-sqrt(6/(fan_in+fan_out)), +sqrt(...)), biases zeros, norm gains ones.
ModelParams init_params(const HyperParams& hyper, std::uint64_t seed);

long parameter_count(const HyperParams& hyper);

// Uniform double in [0, 1) from the top 53 bits of the generator output;
// bit-stable across platforms, unlike std::uniform_real_distribution.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// The cell graph viewed as a bipartite graph: edge nodes sit between
// their endpoint vertex nodes.
struct BipartiteNeighborhoods {
  std::vector<std::vector<int>> vertex_edges;   // per vertex: incident edge ids
  std::vector<std::vector<int>> edge_vertices;  // per edge: its two endpoints
};
BipartiteNeighborhoods bipartite_neighborhoods(const CellGraph& graph);

// Scaled dot-product attention of one query over its neighbors' keys and
// values. Throws std::runtime_error when the neighbor set is empty.
struct AttentionResult {
  Eigen::VectorXd output;   // sum of weighted values
  Eigen::VectorXd weights;  // softmax weights, sum to 1
};
AttentionResult graph_attention(const Eigen::VectorXd& query, const Eigen::MatrixXd& keys,
                                const Eigen::MatrixXd& values);

// Row-wise layer normalization with learned gain/bias.
struct LayerNormResult {
  Eigen::MatrixXd out;
  Eigen::MatrixXd xhat;      // normalized rows before gain/bias
  Eigen::VectorXd inv_std;   // per row
};
LayerNormResult layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias);

enum class RunMode { Train, Eval };

// Everything forward computes for one stream update; kept so gradients
// can be computed exactly and tests can inspect attention weights.
struct StreamTrace {
  Eigen::MatrixXd q, k, v;
  std::vector<Eigen::VectorXd> attn_weights;  // per self node
  Eigen::MatrixXd attn_out;                   // pre-dropout
  Eigen::MatrixXd drop_mask1;                 // empty in eval mode
  Eigen::MatrixXd sum1;                       // self + dropout(attention)
  Eigen::MatrixXd norm1_xhat;
  Eigen::VectorXd norm1_inv_std;
  Eigen::MatrixXd tilde;                      // post first norm
  Eigen::MatrixXd ffn_pre;                    // before ReLU
  Eigen::MatrixXd ffn_out;
  Eigen::MatrixXd drop_mask2;
  Eigen::MatrixXd sum2;
  Eigen::MatrixXd norm2_xhat;
  Eigen::VectorXd norm2_inv_std;
  Eigen::MatrixXd out;
};

// One attention block: self nodes attend over their neighbors among the
// other stream's nodes (queries from self, keys/values from other), then
// residual + norm, feed-forward, residual + norm. In Train mode dropout
// is applied to each sub-layer output before the residual add; rng must
// be non-null. Dropout masks use inverted scaling so Eval is identity.
Eigen::MatrixXd attention_block_forward(const Eigen::MatrixXd& self,
                                        const Eigen::MatrixXd& other,
                                        const std::vector<std::vector<int>>& neighbors,
                                        const BlockParams& params, double dropout_p,
                                        RunMode mode, std::mt19937_64* rng,
                                        StreamTrace* trace);

struct ForwardTrace {
  BipartiteNeighborhoods nbrs;
  Eigen::MatrixXd h_v0, h_e0;                 // embedded features
  std::vector<StreamTrace> vertex_blocks, edge_blocks;
  Eigen::MatrixXd logits;                     // |E| x kClassCount
};

// Full network: embed features, run N parallel vertex/edge block updates
// (block n reads both streams' n-1 states), classify final edge states.
// Eval mode is deterministic. Throws on isolated vertices.
ForwardTrace forward(const CellGraph& graph, const ModelParams& params, RunMode mode,
                     std::mt19937_64* rng = nullptr);

// Weighted cross-entropy over edges, normalized by the sum of applied
// class weights. Throws std::runtime_error on an empty edge set.
double edge_loss(const Eigen::MatrixXd& logits, const std::vector<RelationLabel>& labels,
                 const std::array<double, 3>& class_weights);

struct LossGrad {
  double value;
  Eigen::MatrixXd dlogits;
};
LossGrad edge_loss_with_grad(const Eigen::MatrixXd& logits,
                             const std::vector<RelationLabel>& labels,
                             const std::array<double, 3>& class_weights);

// Exact reverse-mode gradients for every parameter given the forward
// trace and the loss gradient at the logits.
ModelParams backward(const CellGraph& graph, const ModelParams& params,
                     const ForwardTrace& trace, const Eigen::MatrixXd& dlogits);

struct AdamState {
  long step{0};
  ModelParams m, v;
};
AdamState make_adam_state(const ModelParams& params);

// One Adam update; weight decay enters as a gradient-side lambda*theta
// term on every tensor.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state);

// One optimizer step on one labeled graph; returns the loss before the
// update. Dropout is resampled from rng.
double train_step(ModelParams& params, const CellGraph& graph, AdamState& adam,
                  std::mt19937_64& rng);

// Full training run: init from seed, one step per graph per epoch, fixed
// dataset order. Deterministic given (seed, dataset order). Throws if a
// graph has no labels.
ModelParams train(const std::vector<CellGraph>& dataset, const HyperParams& hyper,
                  std::uint64_t seed, std::vector<double>* epoch_mean_loss = nullptr);

// Argmax class per edge; ties resolved by class order (Vertical,
// Horizontal, NoRelation). Empty edge set yields an empty vector.
std::vector<RelationLabel> predict(const CellGraph& graph, const ModelParams& params);

// Versioned JSON checkpoint: hyper params, every tensor with its shape,
// and the training seed. Loading validates all shapes.
void save_checkpoint(const ModelParams& params, std::uint64_t seed,
                     const std::filesystem::path& path);
struct Checkpoint {
  ModelParams params;
  std::uint64_t seed{0};
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tsr
