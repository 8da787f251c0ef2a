#include "tsr/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace tsr {

namespace {

template <typename Params, typename Ref>
std::vector<Ref> collect_tensors(Params& p) {
  std::vector<Ref> refs;
  auto add_mat = [&](const std::string& name, auto& m) {
    refs.push_back(Ref{name, m.data(), m.rows(), m.cols()});
  };
  auto add_vec = [&](const std::string& name, auto& v) {
    refs.push_back(Ref{name, v.data(), v.size(), 1});
  };
  add_mat("embed_v", p.embed_v);
  add_mat("embed_e", p.embed_e);
  for (size_t b = 0; b < p.vertex_stream.size(); ++b) {
    for (auto [stream, tag] : {std::pair{&p.vertex_stream, "v"}, {&p.edge_stream, "e"}}) {
      auto& blk = (*stream)[b];
      const std::string prefix = std::string(tag) + "_block" + std::to_string(b) + ".";
      add_mat(prefix + "attn_query", blk.attn_query);
      add_mat(prefix + "attn_key", blk.attn_key);
      add_mat(prefix + "attn_value", blk.attn_value);
      add_vec(prefix + "norm1_gain", blk.norm1_gain);
      add_vec(prefix + "norm1_bias", blk.norm1_bias);
      add_mat(prefix + "ffn_w1", blk.ffn_w1);
      add_vec(prefix + "ffn_b1", blk.ffn_b1);
      add_mat(prefix + "ffn_w2", blk.ffn_w2);
      add_vec(prefix + "ffn_b2", blk.ffn_b2);
      add_vec(prefix + "norm2_gain", blk.norm2_gain);
      add_vec(prefix + "norm2_bias", blk.norm2_bias);
    }
  }
  add_mat("cls_w", p.cls_w);
  add_vec("cls_b", p.cls_b);
  return refs;
}

void validate_hyper(const HyperParams& h) {
  if (h.blocks < 1 || h.dim < 1 || h.ffn_dim < 1) {
    throw std::invalid_argument("blocks, dim and ffn_dim must be positive");
  }
  if (h.dropout < 0 || h.dropout >= 1) {
    throw std::invalid_argument("dropout must lie in [0, 1)");
  }
}

void xavier_fill(Eigen::MatrixXd& m, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (long r = 0; r < m.rows(); ++r) {
    for (long c = 0; c < m.cols(); ++c) {
      m(r, c) = bound * (2.0 * uniform_unit(rng) - 1.0);
    }
  }
}

// Inverted-scaling dropout mask: entries are 0 or 1/(1-p).
Eigen::MatrixXd sample_dropout_mask(long rows, long cols, double p, std::mt19937_64& rng) {
  const double keep_scale = 1.0 / (1.0 - p);
  Eigen::MatrixXd mask(rows, cols);
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      mask(r, c) = uniform_unit(rng) < p ? 0.0 : keep_scale;
    }
  }
  return mask;
}

int label_index(RelationLabel label) { return static_cast<int>(label); }

}  // namespace

std::vector<TensorView> tensor_views(const ModelParams& params) {
  return collect_tensors<const ModelParams, TensorView>(params);
}

std::vector<TensorRef> tensor_refs(ModelParams& params) {
  return collect_tensors<ModelParams, TensorRef>(params);
}

ModelParams make_params(const HyperParams& hyper) {
  validate_hyper(hyper);
  const int d = hyper.dim;
  ModelParams p;
  p.hyper = hyper;
  p.embed_v = Eigen::MatrixXd::Zero(kVertexFeatureCount, d);
  p.embed_e = Eigen::MatrixXd::Zero(kEdgeFeatureCount, d);
  auto make_block = [&] {
    BlockParams blk;
    blk.attn_query = Eigen::MatrixXd::Zero(d, d);
    blk.attn_key = Eigen::MatrixXd::Zero(d, d);
    blk.attn_value = Eigen::MatrixXd::Zero(d, d);
    blk.norm1_gain = Eigen::VectorXd::Zero(d);
    blk.norm1_bias = Eigen::VectorXd::Zero(d);
    blk.ffn_w1 = Eigen::MatrixXd::Zero(d, hyper.ffn_dim);
    blk.ffn_b1 = Eigen::VectorXd::Zero(hyper.ffn_dim);
    blk.ffn_w2 = Eigen::MatrixXd::Zero(hyper.ffn_dim, d);
    blk.ffn_b2 = Eigen::VectorXd::Zero(d);
    blk.norm2_gain = Eigen::VectorXd::Zero(d);
    blk.norm2_bias = Eigen::VectorXd::Zero(d);
    return blk;
  };
  for (int b = 0; b < hyper.blocks; ++b) {
    p.vertex_stream.push_back(make_block());
    p.edge_stream.push_back(make_block());
  }
  p.cls_w = Eigen::MatrixXd::Zero(d, kClassCount);
  p.cls_b = Eigen::VectorXd::Zero(kClassCount);
  return p;
}

ModelParams init_params(const HyperParams& hyper, std::uint64_t seed) {
  ModelParams p = make_params(hyper);
  std::mt19937_64 rng(seed);
  xavier_fill(p.embed_v, rng);
  xavier_fill(p.embed_e, rng);
  for (int b = 0; b < hyper.blocks; ++b) {
    for (BlockParams* blk : {&p.vertex_stream[b], &p.edge_stream[b]}) {
      xavier_fill(blk->attn_query, rng);
      xavier_fill(blk->attn_key, rng);
      xavier_fill(blk->attn_value, rng);
      xavier_fill(blk->ffn_w1, rng);
      xavier_fill(blk->ffn_w2, rng);
      blk->norm1_gain.setOnes();
      blk->norm2_gain.setOnes();
    }
  }
  xavier_fill(p.cls_w, rng);
  return p;
}

long parameter_count(const HyperParams& hyper) {
  ModelParams p = make_params(hyper);
  long count = 0;
  for (const TensorView& t : tensor_views(p)) count += t.size();
  return count;
}

BipartiteNeighborhoods bipartite_neighborhoods(const CellGraph& graph) {
  BipartiteNeighborhoods nbrs;
  nbrs.vertex_edges.resize(graph.cells.size());
  nbrs.edge_vertices.resize(graph.edges.size());
  for (size_t e = 0; e < graph.edges.size(); ++e) {
    auto [a, b] = graph.edges[e];
    if (a < 0 || b < 0 || a >= static_cast<int>(graph.cells.size()) ||
        b >= static_cast<int>(graph.cells.size()) || a == b) {
      throw std::invalid_argument("edge " + std::to_string(e) + " has invalid endpoints");
    }
    nbrs.vertex_edges[a].push_back(static_cast<int>(e));
    nbrs.vertex_edges[b].push_back(static_cast<int>(e));
    nbrs.edge_vertices[e] = {a, b};
  }
  return nbrs;
}

AttentionResult graph_attention(const Eigen::VectorXd& query, const Eigen::MatrixXd& keys,
                                const Eigen::MatrixXd& values) {
  const long m = keys.rows();
  if (m == 0) throw std::runtime_error("isolated node: attention over zero neighbors");
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.size()));
  Eigen::VectorXd logits = (keys * query) * scale;
  Eigen::VectorXd weights = (logits.array() - logits.maxCoeff()).exp();
  weights /= weights.sum();
  AttentionResult result;
  result.weights = weights;
  result.output = values.transpose() * weights;
  return result;
}

LayerNormResult layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias) {
  const long n = x.rows(), d = x.cols();
  LayerNormResult r;
  r.xhat.resize(n, d);
  r.out.resize(n, d);
  r.inv_std.resize(n);
  for (long i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    r.inv_std(i) = inv;
    r.xhat.row(i) = (x.row(i).array() - mean) * inv;
    r.out.row(i) = r.xhat.row(i).cwiseProduct(gain.transpose()) + bias.transpose();
  }
  return r;
}

Eigen::MatrixXd attention_block_forward(const Eigen::MatrixXd& self,
                                        const Eigen::MatrixXd& other,
                                        const std::vector<std::vector<int>>& neighbors,
                                        const BlockParams& params, double dropout_p,
                                        RunMode mode, std::mt19937_64* rng,
                                        StreamTrace* trace) {
  const long n = self.rows();
  const long d = self.cols();
  if (static_cast<long>(neighbors.size()) != n) {
    throw std::invalid_argument("neighbor list size does not match self node count");
  }
  const bool training = mode == RunMode::Train;
  if (training && rng == nullptr) {
    throw std::invalid_argument("training forward needs an rng for dropout");
  }

  StreamTrace local;
  StreamTrace& t = trace ? *trace : local;
  t.q.noalias() = self * params.attn_query;
  t.k.noalias() = other * params.attn_key;
  t.v.noalias() = other * params.attn_value;

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  t.attn_weights.assign(n, {});
  t.attn_out.setZero(n, d);
  for (long u = 0; u < n; ++u) {
    const std::vector<int>& nb = neighbors[u];
    if (nb.empty()) {
      throw std::runtime_error("isolated node " + std::to_string(u) +
                               ": attention over zero neighbors");
    }
    Eigen::VectorXd logits(nb.size());
    for (size_t i = 0; i < nb.size(); ++i) {
      logits(i) = t.k.row(nb[i]).dot(t.q.row(u)) * scale;
    }
    Eigen::VectorXd w = (logits.array() - logits.maxCoeff()).exp();
    w /= w.sum();
    for (size_t i = 0; i < nb.size(); ++i) {
      t.attn_out.row(u) += w(i) * t.v.row(nb[i]);
    }
    t.attn_weights[u] = std::move(w);
  }

  if (training && dropout_p > 0) {
    t.drop_mask1 = sample_dropout_mask(n, d, dropout_p, *rng);
    t.sum1 = self + t.attn_out.cwiseProduct(t.drop_mask1);
  } else {
    t.drop_mask1.resize(0, 0);
    t.sum1 = self + t.attn_out;
  }

  LayerNormResult n1 = layer_norm(t.sum1, params.norm1_gain, params.norm1_bias);
  t.norm1_xhat = std::move(n1.xhat);
  t.norm1_inv_std = std::move(n1.inv_std);
  t.tilde = std::move(n1.out);

  t.ffn_pre.noalias() = t.tilde * params.ffn_w1;
  t.ffn_pre.rowwise() += params.ffn_b1.transpose();
  t.ffn_out.noalias() = t.ffn_pre.cwiseMax(0.0) * params.ffn_w2;
  t.ffn_out.rowwise() += params.ffn_b2.transpose();

  if (training && dropout_p > 0) {
    t.drop_mask2 = sample_dropout_mask(n, d, dropout_p, *rng);
    t.sum2 = t.tilde + t.ffn_out.cwiseProduct(t.drop_mask2);
  } else {
    t.drop_mask2.resize(0, 0);
    t.sum2 = t.tilde + t.ffn_out;
  }

  LayerNormResult n2 = layer_norm(t.sum2, params.norm2_gain, params.norm2_bias);
  t.norm2_xhat = std::move(n2.xhat);
  t.norm2_inv_std = std::move(n2.inv_std);
  t.out = std::move(n2.out);
  return t.out;
}

ForwardTrace forward(const CellGraph& graph, const ModelParams& params, RunMode mode,
                     std::mt19937_64* rng) {
  validate_hyper(params.hyper);
  if (graph.vertex_features.cols() != kVertexFeatureCount ||
      graph.vertex_features.rows() != static_cast<long>(graph.cells.size()) ||
      graph.edge_features.cols() != kEdgeFeatureCount ||
      graph.edge_features.rows() != static_cast<long>(graph.edges.size())) {
    throw std::invalid_argument("graph feature matrices have unexpected shape");
  }
  if (graph.edges.empty()) {
    throw std::runtime_error("graph has no edges to classify");
  }

  ForwardTrace t;
  t.nbrs = bipartite_neighborhoods(graph);
  for (size_t v = 0; v < t.nbrs.vertex_edges.size(); ++v) {
    if (t.nbrs.vertex_edges[v].empty()) {
      throw std::runtime_error("isolated vertex " + std::to_string(v));
    }
  }

  t.h_v0.noalias() = graph.vertex_features * params.embed_v;
  t.h_e0.noalias() = graph.edge_features * params.embed_e;

  const int n_blocks = params.hyper.blocks;
  t.vertex_blocks.resize(n_blocks);
  t.edge_blocks.resize(n_blocks);
  for (int b = 0; b < n_blocks; ++b) {
    // parallel update: both streams read the previous level's states
    const Eigen::MatrixXd& hv = b == 0 ? t.h_v0 : t.vertex_blocks[b - 1].out;
    const Eigen::MatrixXd& he = b == 0 ? t.h_e0 : t.edge_blocks[b - 1].out;
    attention_block_forward(hv, he, t.nbrs.vertex_edges, params.vertex_stream[b],
                            params.hyper.dropout, mode, rng, &t.vertex_blocks[b]);
    attention_block_forward(he, hv, t.nbrs.edge_vertices, params.edge_stream[b],
                            params.hyper.dropout, mode, rng, &t.edge_blocks[b]);
  }

  const Eigen::MatrixXd& edge_final = t.edge_blocks[n_blocks - 1].out;
  t.logits.noalias() = edge_final * params.cls_w;
  t.logits.rowwise() += params.cls_b.transpose();
  return t;
}

double edge_loss(const Eigen::MatrixXd& logits, const std::vector<RelationLabel>& labels,
                 const std::array<double, 3>& class_weights) {
  return edge_loss_with_grad(logits, labels, class_weights).value;
}

LossGrad edge_loss_with_grad(const Eigen::MatrixXd& logits,
                             const std::vector<RelationLabel>& labels,
                             const std::array<double, 3>& class_weights) {
  if (logits.rows() == 0) throw std::runtime_error("loss over an empty edge set");
  if (logits.rows() != static_cast<long>(labels.size()) || logits.cols() != kClassCount) {
    throw std::invalid_argument("logits shape does not match labels");
  }
  double weight_sum = 0;
  for (RelationLabel y : labels) weight_sum += class_weights[label_index(y)];
  if (weight_sum <= 0) throw std::runtime_error("total class weight is zero");

  LossGrad result;
  result.value = 0;
  result.dlogits.setZero(logits.rows(), kClassCount);
  for (long e = 0; e < logits.rows(); ++e) {
    const int y = label_index(labels[e]);
    const double w = class_weights[y] / weight_sum;
    const double max_logit = logits.row(e).maxCoeff();
    Eigen::Vector3d shifted = logits.row(e).transpose().array() - max_logit;
    const double lse = std::log(shifted.array().exp().sum());
    result.value += w * (lse - shifted(y));
    Eigen::Vector3d softmax = (shifted.array() - lse).exp();
    result.dlogits.row(e) = w * softmax.transpose();
    result.dlogits(e, y) -= w;
  }
  return result;
}

namespace {

void layer_norm_backward(const Eigen::MatrixXd& d_out, const Eigen::MatrixXd& xhat,
                         const Eigen::VectorXd& inv_std, const Eigen::VectorXd& gain,
                         Eigen::VectorXd& d_gain, Eigen::VectorXd& d_bias,
                         Eigen::MatrixXd& d_x) {
  const long n = d_out.rows(), d = d_out.cols();
  d_gain += (d_out.cwiseProduct(xhat)).colwise().sum();
  d_bias += d_out.colwise().sum();
  d_x.resize(n, d);
  for (long i = 0; i < n; ++i) {
    Eigen::RowVectorXd dxhat = d_out.row(i).cwiseProduct(gain.transpose());
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
    d_x.row(i) = inv_std(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2);
  }
}

// Backward through one attention block. d_out is the gradient at the
// block output; gradients are accumulated into d_params, and the
// gradients with respect to the block inputs are returned.
void attention_block_backward(const Eigen::MatrixXd& self, const Eigen::MatrixXd& other,
                              const std::vector<std::vector<int>>& neighbors,
                              const BlockParams& params, const StreamTrace& t,
                              const Eigen::MatrixXd& d_out, BlockParams& d_params,
                              Eigen::MatrixXd& d_self, Eigen::MatrixXd& d_other) {
  const long n = self.rows(), d = self.cols();

  Eigen::MatrixXd d_sum2;
  layer_norm_backward(d_out, t.norm2_xhat, t.norm2_inv_std, params.norm2_gain,
                      d_params.norm2_gain, d_params.norm2_bias, d_sum2);

  Eigen::MatrixXd d_tilde = d_sum2;  // residual path
  Eigen::MatrixXd d_ffn_out = t.drop_mask2.size() > 0 ? d_sum2.cwiseProduct(t.drop_mask2)
                                                      : d_sum2;

  Eigen::MatrixXd hidden = t.ffn_pre.cwiseMax(0.0);
  Eigen::MatrixXd d_hidden = d_ffn_out * params.ffn_w2.transpose();
  d_params.ffn_w2.noalias() += hidden.transpose() * d_ffn_out;
  d_params.ffn_b2 += d_ffn_out.colwise().sum();
  Eigen::MatrixXd d_pre =
      d_hidden.cwiseProduct((t.ffn_pre.array() > 0.0).cast<double>().matrix());
  d_params.ffn_w1.noalias() += t.tilde.transpose() * d_pre;
  d_params.ffn_b1 += d_pre.colwise().sum();
  d_tilde.noalias() += d_pre * params.ffn_w1.transpose();

  Eigen::MatrixXd d_sum1;
  layer_norm_backward(d_tilde, t.norm1_xhat, t.norm1_inv_std, params.norm1_gain,
                      d_params.norm1_gain, d_params.norm1_bias, d_sum1);

  d_self = d_sum1;  // residual path
  Eigen::MatrixXd d_attn = t.drop_mask1.size() > 0 ? d_sum1.cwiseProduct(t.drop_mask1)
                                                   : d_sum1;

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Eigen::MatrixXd d_q = Eigen::MatrixXd::Zero(n, d);
  Eigen::MatrixXd d_k = Eigen::MatrixXd::Zero(other.rows(), d);
  Eigen::MatrixXd d_v = Eigen::MatrixXd::Zero(other.rows(), d);
  for (long u = 0; u < n; ++u) {
    const std::vector<int>& nb = neighbors[u];
    const Eigen::VectorXd& w = t.attn_weights[u];
    Eigen::VectorXd d_w(nb.size());
    for (size_t i = 0; i < nb.size(); ++i) {
      d_v.row(nb[i]) += w(i) * d_attn.row(u);
      d_w(i) = t.v.row(nb[i]).dot(d_attn.row(u));
    }
    const double w_dot = w.dot(d_w);
    for (size_t i = 0; i < nb.size(); ++i) {
      const double d_logit = w(i) * (d_w(i) - w_dot);
      d_q.row(u) += d_logit * scale * t.k.row(nb[i]);
      d_k.row(nb[i]) += d_logit * scale * t.q.row(u);
    }
  }

  d_self.noalias() += d_q * params.attn_query.transpose();
  d_params.attn_query.noalias() += self.transpose() * d_q;
  d_other.noalias() = d_k * params.attn_key.transpose();
  d_other.noalias() += d_v * params.attn_value.transpose();
  d_params.attn_key.noalias() += other.transpose() * d_k;
  d_params.attn_value.noalias() += other.transpose() * d_v;
}

}  // namespace

ModelParams backward(const CellGraph& graph, const ModelParams& params,
                     const ForwardTrace& trace, const Eigen::MatrixXd& dlogits) {
  ModelParams grads = make_params(params.hyper);
  const int n_blocks = params.hyper.blocks;

  const Eigen::MatrixXd& edge_final = trace.edge_blocks[n_blocks - 1].out;
  grads.cls_w.noalias() = edge_final.transpose() * dlogits;
  grads.cls_b = dlogits.colwise().sum();

  Eigen::MatrixXd d_hv = Eigen::MatrixXd::Zero(trace.h_v0.rows(), params.hyper.dim);
  Eigen::MatrixXd d_he = dlogits * params.cls_w.transpose();

  for (int b = n_blocks - 1; b >= 0; --b) {
    const Eigen::MatrixXd& hv_in = b == 0 ? trace.h_v0 : trace.vertex_blocks[b - 1].out;
    const Eigen::MatrixXd& he_in = b == 0 ? trace.h_e0 : trace.edge_blocks[b - 1].out;
    Eigen::MatrixXd d_hv_self, d_he_other, d_he_self, d_hv_other;
    attention_block_backward(hv_in, he_in, trace.nbrs.vertex_edges, params.vertex_stream[b],
                             trace.vertex_blocks[b], d_hv, grads.vertex_stream[b],
                             d_hv_self, d_he_other);
    attention_block_backward(he_in, hv_in, trace.nbrs.edge_vertices, params.edge_stream[b],
                             trace.edge_blocks[b], d_he, grads.edge_stream[b], d_he_self,
                             d_hv_other);
    d_hv = d_hv_self + d_hv_other;
    d_he = d_he_self + d_he_other;
  }

  grads.embed_v.noalias() = graph.vertex_features.transpose() * d_hv;
  grads.embed_e.noalias() = graph.edge_features.transpose() * d_he;
  return grads;
}

AdamState make_adam_state(const ModelParams& params) {
  AdamState state;
  state.m = make_params(params.hyper);
  state.v = make_params(params.hyper);
  return state;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
  const HyperParams& h = params.hyper;
  state.step += 1;
  const double bias1 = 1.0 - std::pow(h.adam_beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(h.adam_beta2, static_cast<double>(state.step));

  auto p_refs = tensor_refs(params);
  auto g_views = tensor_views(grads);
  auto m_refs = tensor_refs(state.m);
  auto v_refs = tensor_refs(state.v);
  for (size_t t = 0; t < p_refs.size(); ++t) {
    double* theta = p_refs[t].data;
    const double* g = g_views[t].data;
    double* m = m_refs[t].data;
    double* v = v_refs[t].data;
    const long size = p_refs[t].size();
    for (long i = 0; i < size; ++i) {
      const double grad = g[i] + h.weight_decay * theta[i];
      m[i] = h.adam_beta1 * m[i] + (1.0 - h.adam_beta1) * grad;
      v[i] = h.adam_beta2 * v[i] + (1.0 - h.adam_beta2) * grad * grad;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.adam_eps);
    }
  }
}

double train_step(ModelParams& params, const CellGraph& graph, AdamState& adam,
                  std::mt19937_64& rng) {
  if (graph.labels.size() != graph.edges.size() || graph.labels.empty()) {
    throw std::runtime_error("training graph has no edge labels");
  }
  ForwardTrace trace = forward(graph, params, RunMode::Train, &rng);
  LossGrad lg = edge_loss_with_grad(trace.logits, graph.labels, params.hyper.class_weights);
  ModelParams grads = backward(graph, params, trace, lg.dlogits);
  adam_step(params, grads, adam);
  return lg.value;
}

ModelParams train(const std::vector<CellGraph>& dataset, const HyperParams& hyper,
                  std::uint64_t seed, std::vector<double>* epoch_mean_loss) {
  if (dataset.empty()) throw std::runtime_error("empty training dataset");
  for (const CellGraph& g : dataset) {
    if (g.labels.size() != g.edges.size() || g.labels.empty()) {
      throw std::runtime_error("training graph has no edge labels");
    }
  }
  ModelParams params = init_params(hyper, seed);
  AdamState adam = make_adam_state(params);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);  // dropout stream
  if (epoch_mean_loss) epoch_mean_loss->clear();
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    double loss_sum = 0;
    for (const CellGraph& g : dataset) {
      loss_sum += train_step(params, g, adam, rng);
    }
    if (epoch_mean_loss) {
      epoch_mean_loss->push_back(loss_sum / static_cast<double>(dataset.size()));
    }
  }
  return params;
}

std::vector<RelationLabel> predict(const CellGraph& graph, const ModelParams& params) {
  if (graph.edges.empty()) return {};
  ForwardTrace trace = forward(graph, params, RunMode::Eval);
  std::vector<RelationLabel> labels(graph.edges.size());
  for (long e = 0; e < trace.logits.rows(); ++e) {
    int best = 0;
    for (int c = 1; c < kClassCount; ++c) {
      if (trace.logits(e, c) > trace.logits(e, best)) best = c;
    }
    labels[e] = static_cast<RelationLabel>(best);
  }
  return labels;
}

namespace {
constexpr const char* kCheckpointFormat = "tsr-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const ModelParams& params, std::uint64_t seed,
                     const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["seed"] = seed;
  const HyperParams& h = params.hyper;
  doc["hyper"] = {{"blocks", h.blocks},
                  {"dim", h.dim},
                  {"ffn_dim", h.ffn_dim},
                  {"learning_rate", h.learning_rate},
                  {"adam_beta1", h.adam_beta1},
                  {"adam_beta2", h.adam_beta2},
                  {"adam_eps", h.adam_eps},
                  {"weight_decay", h.weight_decay},
                  {"dropout", h.dropout},
                  {"class_weights", h.class_weights},
                  {"epochs", h.epochs},
                  {"k", h.k}};
  nlohmann::ordered_json tensors;
  for (const TensorView& t : tensor_views(params)) {
    nlohmann::ordered_json entry;
    entry["shape"] = {t.rows, t.cols};
    entry["data"] = std::vector<double>(t.data, t.data + t.size());
    tensors[t.name] = std::move(entry);
  }
  doc["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw std::runtime_error("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint parse error in " + path.string() + ": " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kCheckpointFormat) {
      throw std::runtime_error("not a model checkpoint");
    }
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw std::runtime_error("unsupported checkpoint version");
    }
    HyperParams h;
    const auto& hj = doc.at("hyper");
    h.blocks = hj.at("blocks").get<int>();
    h.dim = hj.at("dim").get<int>();
    h.ffn_dim = hj.at("ffn_dim").get<int>();
    h.learning_rate = hj.at("learning_rate").get<double>();
    h.adam_beta1 = hj.at("adam_beta1").get<double>();
    h.adam_beta2 = hj.at("adam_beta2").get<double>();
    h.adam_eps = hj.at("adam_eps").get<double>();
    h.weight_decay = hj.at("weight_decay").get<double>();
    h.dropout = hj.at("dropout").get<double>();
    h.class_weights = hj.at("class_weights").get<std::array<double, 3>>();
    h.epochs = hj.at("epochs").get<int>();
    h.k = hj.at("k").get<int>();

    Checkpoint ckpt;
    ckpt.seed = doc.at("seed").get<std::uint64_t>();
    ckpt.params = make_params(h);
    const auto& tensors = doc.at("tensors");
    auto refs = tensor_refs(ckpt.params);
    if (tensors.size() != refs.size()) {
      throw std::runtime_error("checkpoint tensor count mismatch: expected " +
                               std::to_string(refs.size()) + ", found " +
                               std::to_string(tensors.size()));
    }
    for (TensorRef& t : refs) {
      auto it = tensors.find(t.name);
      if (it == tensors.end()) {
        throw std::runtime_error("checkpoint is missing tensor " + t.name);
      }
      const auto shape = it->at("shape").get<std::array<long, 2>>();
      if (shape[0] != t.rows || shape[1] != t.cols) {
        throw std::runtime_error("checkpoint shape mismatch for " + t.name + ": expected " +
                                 std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                                 ", found " + std::to_string(shape[0]) + "x" +
                                 std::to_string(shape[1]));
      }
      const auto data = it->at("data").get<std::vector<double>>();
      if (static_cast<long>(data.size()) != t.size()) {
        throw std::runtime_error("checkpoint data length mismatch for " + t.name);
      }
      std::copy(data.begin(), data.end(), t.data);
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace tsr
