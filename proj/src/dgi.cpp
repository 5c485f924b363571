#include "anomale/dgi.hpp"

#include "anomale/log.hpp"
#include "anomale/random.hpp"

#include <cmath>
#include <sstream>

namespace anomale {

std::string_view to_string(ReadoutSource r) { return r == ReadoutSource::edges ? "edges" : "nodes"; }

ReadoutSource parse_readout_source(std::string_view s) {
  if (s == "edges") return ReadoutSource::edges;
  if (s == "nodes") return ReadoutSource::nodes;
  throw std::invalid_argument("unknown readout source '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
}

int summary_dim(const EncoderConfig& config, ReadoutSource readout) {
  return readout == ReadoutSource::edges ? config.edge_embedding_dim() : config.hidden_dim;
}

DiscriminatorParams init_discriminator(int emb_dim, int summary_dim, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xD15C));
  const double bound = std::sqrt(6.0 / static_cast<double>(emb_dim + summary_dim));
  DiscriminatorParams d{Matrix(emb_dim, summary_dim)};
  for (Eigen::Index i = 0; i < d.w.size(); ++i) d.w.data()[i] = rng.uniform(-bound, bound);
  return d;
}

FlowGraph corrupt_with(const FlowGraph& graph, std::span<const std::size_t> permutation) {
  const auto& x = graph.edge_features();
  if (permutation.size() != static_cast<std::size_t>(x.rows())) {
    throw ShapeError("corrupt: permutation length does not match edge count");
  }
  Matrix shuffled(x.rows(), x.cols());
  for (std::size_t i = 0; i < permutation.size(); ++i) {
    shuffled.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(permutation[i]));
  }
  return graph.with_edge_features(std::move(shuffled));
}

FlowGraph corrupt(const FlowGraph& graph, std::uint64_t seed) {
  Rng rng(seed);
  const auto perm = rng.permutation(graph.num_edges());
  return corrupt_with(graph, perm);
}

RowVector readout(const Matrix& embeddings) {
  if (embeddings.rows() == 0) throw std::invalid_argument("readout: no embeddings");
  return sigmoid(mean_of_rows(embeddings));
}

double discriminate(const RowVector& z, const RowVector& summary, const Matrix& w) {
  if (w.rows() != z.size() || w.cols() != summary.size()) {
    throw ShapeError("discriminate: w is " + detail::shape_str(w.rows(), w.cols()) + ", z has " +
                     std::to_string(z.size()) + ", summary has " + std::to_string(summary.size()));
  }
  return sigmoid(z.dot(w * summary.transpose()));
}

double dgi_loss(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.size() != neg_scores.size() || pos_scores.empty()) {
    throw std::invalid_argument("dgi_loss: need equal, nonzero numbers of positive and negative scores");
  }
  std::size_t clamped = 0;
  auto clamp = [&clamped](double p) {
    if (p < kScoreClamp) {
      ++clamped;
      return kScoreClamp;
    }
    if (p > 1.0 - kScoreClamp) {
      ++clamped;
      return 1.0 - kScoreClamp;
    }
    return p;
  };
  double sum = 0.0;
  for (std::size_t i = 0; i < pos_scores.size(); ++i) {
    sum += std::log(clamp(pos_scores[i])) + std::log(1.0 - clamp(neg_scores[i]));
  }
  if (clamped > 0) log::debug("dgi_loss: clamped ", clamped, " scores to [1e-12, 1-1e-12]");
  return -sum / (2.0 * static_cast<double>(pos_scores.size()));
}

DgiObjective::DgiObjective(EncoderConfig config, ReadoutSource readout) : config_(config), readout_(readout) {
  config_.validate();
}

const DgiObjective::Tape& DgiObjective::tape() const {
  if (!tape_) throw std::logic_error("DgiObjective: backward/scores requested before forward");
  return *tape_;
}

const Vector& DgiObjective::positive_scores() const { return tape().pos_scores; }
const Vector& DgiObjective::negative_scores() const { return tape().neg_scores; }
const RowVector& DgiObjective::summary() const { return tape().summary; }

namespace {

// Per-node sums of an edge quantity keyed by source and by destination.
void scatter_by_endpoint(const FlowGraph& g, const Vector& per_edge, Vector& by_src, Vector& by_dst) {
  by_src = Vector::Zero(static_cast<Eigen::Index>(g.num_nodes()));
  by_dst = Vector::Zero(static_cast<Eigen::Index>(g.num_nodes()));
  for (std::size_t i = 0; i < g.num_edges(); ++i) {
    const auto& e = g.edges()[i];
    by_src[e.src] += per_edge[static_cast<Eigen::Index>(i)];
    by_dst[e.dst] += per_edge[static_cast<Eigen::Index>(i)];
  }
}

// sigmoid(z_uv^T ws) for every edge without materialising z_uv = [h_u | h_v].
Vector edge_scores(const FlowGraph& g, const Matrix& h, const Vector& ws) {
  const auto hd = h.cols();
  const Vector from_src = h * ws.head(hd);
  const Vector from_dst = h * ws.tail(hd);
  Vector scores(static_cast<Eigen::Index>(g.num_edges()));
  for (std::size_t i = 0; i < g.num_edges(); ++i) {
    const auto& e = g.edges()[i];
    scores[static_cast<Eigen::Index>(i)] = sigmoid(from_src[e.src] + from_dst[e.dst]);
  }
  return scores;
}

Vector endpoint_counts(const FlowGraph& g, bool by_source) {
  Vector c = Vector::Zero(static_cast<Eigen::Index>(g.num_nodes()));
  for (const auto& e : g.edges()) c[by_source ? e.src : e.dst] += 1.0;
  return c;
}

}  // namespace

double DgiObjective::forward(const FlowGraph& graph, const FlowGraph& corrupted, const EncoderParams& encoder,
                             const DiscriminatorParams& discriminator) {
  if (graph.num_edges() == 0) throw std::invalid_argument("DgiObjective: graph has no edges");
  if (graph.num_edges() != corrupted.num_edges() || graph.num_nodes() != corrupted.num_nodes()) {
    throw ShapeError("DgiObjective: corrupted graph topology differs from the input graph");
  }
  const int emb = config_.edge_embedding_dim();
  const int sdim = summary_dim(config_, readout_);
  if (discriminator.w.rows() != emb || discriminator.w.cols() != sdim) {
    throw ShapeError("DgiObjective: discriminator w is " +
                     detail::shape_str(discriminator.w.rows(), discriminator.w.cols()) + ", expected " +
                     detail::shape_str(emb, sdim));
  }

  Tape t{&graph, &corrupted, encoder, discriminator.w, encode_nodes_traced(graph, encoder, config_),
         encode_nodes_traced(corrupted, encoder, config_), {}, {}, {}, {}};
  const Matrix& h = t.pos.node_embeddings;
  if (h.cols() * 2 != emb) throw ShapeError("DgiObjective: edge embedding width must be 2 * hidden_dim");

  RowVector mean;
  if (readout_ == ReadoutSource::edges) {
    // Column mean of the edge embedding matrix [h_src | h_dst].
    const double e = static_cast<double>(graph.num_edges());
    mean.resize(emb);
    mean.head(h.cols()) = endpoint_counts(graph, true).transpose() * h / e;
    mean.tail(h.cols()) = endpoint_counts(graph, false).transpose() * h / e;
  } else {
    mean = mean_of_rows(h);
  }
  t.summary = sigmoid(mean);
  t.ws = t.w * t.summary.transpose();
  t.pos_scores = edge_scores(graph, h, t.ws);
  t.neg_scores = edge_scores(corrupted, t.neg.node_embeddings, t.ws);
  const double loss = dgi_loss({t.pos_scores.data(), static_cast<std::size_t>(t.pos_scores.size())},
                               {t.neg_scores.data(), static_cast<std::size_t>(t.neg_scores.size())});
  tape_ = std::move(t);
  return loss;
}

DgiGradients DgiObjective::backward() const {
  const Tape& t = tape();
  const FlowGraph& g = *t.graph;
  const FlowGraph& gc = *t.corrupted;
  const Matrix& h = t.pos.node_embeddings;
  const Matrix& hc = t.neg.node_embeddings;
  const auto hd = h.cols();
  const double n = static_cast<double>(g.num_edges());

  // dL/dlogit: -(1 - p)/(2n) for positives, q/(2n) for negatives.
  const Vector g_pos = -(Vector::Ones(t.pos_scores.size()) - t.pos_scores) / (2.0 * n);
  const Vector g_neg = t.neg_scores / (2.0 * n);

  Vector pos_src, pos_dst, neg_src, neg_dst;
  scatter_by_endpoint(g, g_pos, pos_src, pos_dst);
  scatter_by_endpoint(gc, g_neg, neg_src, neg_dst);

  // logit_e = z_e . ws, so dws = sum_e g_e z_e.
  Vector grad_ws(2 * hd);
  grad_ws.head(hd) = h.transpose() * pos_src + hc.transpose() * neg_src;
  grad_ws.tail(hd) = h.transpose() * pos_dst + hc.transpose() * neg_dst;

  DgiGradients out;
  out.discriminator = grad_ws * t.summary;  // ws = w s  =>  dw = dws s^T
  const RowVector grad_summary = (t.w.transpose() * grad_ws).transpose();
  const RowVector grad_mean = grad_summary.cwiseProduct(t.summary.cwiseProduct(RowVector::Ones(t.summary.size()) - t.summary));

  const RowVector ws_src = t.ws.head(hd).transpose();
  const RowVector ws_dst = t.ws.tail(hd).transpose();
  Matrix grad_h = pos_src * ws_src + pos_dst * ws_dst;
  const Matrix grad_hc = neg_src * ws_src + neg_dst * ws_dst;

  if (readout_ == ReadoutSource::edges) {
    grad_h += endpoint_counts(g, true) * grad_mean.head(hd) / n;
    grad_h += endpoint_counts(g, false) * grad_mean.tail(hd) / n;
  } else {
    grad_h.rowwise() += grad_mean / static_cast<double>(h.rows());
  }

  out.encoder = encoder_backward(g, t.encoder, t.pos, grad_h);
  const auto neg_grads = encoder_backward(gc, t.encoder, t.neg, grad_hc);
  for (std::size_t k = 0; k < out.encoder.size(); ++k) out.encoder[k] += neg_grads[k];
  return out;
}

std::uint64_t epoch_corruption_seed(std::uint64_t master_seed, int epoch) {
  return mix_seed(master_seed, 0x10000 + static_cast<std::uint64_t>(epoch));
}

TrainResult train(const FlowGraph& graph, const EncoderConfig& encoder_config, const TrainConfig& train_config) {
  encoder_config.validate();
  train_config.validate();
  if (static_cast<int>(graph.feature_dim()) != encoder_config.input_dim) {
    throw ShapeError("train: graph feature width does not match encoder input_dim");
  }

  const int sdim = summary_dim(encoder_config, train_config.readout);
  EncoderParams enc = init_encoder_params(encoder_config, train_config.seed);
  DiscriminatorParams disc = init_discriminator(encoder_config.edge_embedding_dim(), sdim, train_config.seed);

  std::vector<NamedMatrix> params;
  for (std::size_t k = 0; k < enc.weights.size(); ++k) {
    params.push_back({"encoder.W" + std::to_string(k + 1), enc.weights[k]});
  }
  params.push_back({"discriminator.w", disc.w});
  AdamConfig adam_cfg;
  adam_cfg.lr = train_config.lr;
  AdamState adam(adam_cfg, params);

  DgiObjective objective(encoder_config, train_config.readout);
  TrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(train_config.epochs));
  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    for (std::size_t k = 0; k < enc.weights.size(); ++k) enc.weights[k] = params[k].value;
    disc.w = params.back().value;

    const FlowGraph corrupted = corrupt(graph, epoch_corruption_seed(train_config.seed, epoch));
    const double loss = objective.forward(graph, corrupted, enc, disc);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "training diverged at epoch " << epoch << ": loss=" << loss;
      if (!result.loss_trace.empty()) msg << ", previous loss=" << result.loss_trace.back();
      for (const auto& p : params) msg << ", |" << p.name << "|=" << p.value.norm();
      throw TrainingDiverged(msg.str());
    }
    result.loss_trace.push_back(loss);

    DgiGradients grads = objective.backward();
    std::vector<Matrix> flat = std::move(grads.encoder);
    flat.push_back(std::move(grads.discriminator));
    adam_step(params, flat, adam);
    if (epoch == 1 || epoch % 20 == 0 || epoch == train_config.epochs) {
      log::info("epoch ", epoch, "/", train_config.epochs, " loss ", loss);
    }
  }

  for (std::size_t k = 0; k < enc.weights.size(); ++k) enc.weights[k] = params[k].value;
  disc.w = params.back().value;
  if (encode_nodes(graph, enc, encoder_config).isZero(0.0)) {
    log::warn("train: every hidden unit is inactive on every node (collapsed encoder); "
              "embeddings will be all zero, try a smaller learning rate");
  }
  result.encoder = std::move(enc);
  result.discriminator = std::move(disc);
  result.optimizer_steps = adam.step;
  return result;
}

}  // namespace anomale
