#pragma once

#include "anomale/adam.hpp"
#include "anomale/encoder.hpp"
#include "anomale/flow_graph.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace anomale {

enum class ReadoutSource { edges, nodes };

std::string_view to_string(ReadoutSource r);
ReadoutSource parse_readout_source(std::string_view s);

struct TrainConfig {
  int epochs = 200;
  double lr = 0.003;
  std::uint64_t seed = 0;
  ReadoutSource readout = ReadoutSource::edges;

  void validate() const;
};

/// Bilinear weight of D(z, s) = sigmoid(z^T w s); [emb_dim x summary_dim].
struct DiscriminatorParams {
  Matrix w;
};

DiscriminatorParams init_discriminator(int emb_dim, int summary_dim, std::uint64_t seed);
int summary_dim(const EncoderConfig& config, ReadoutSource readout);

/// Edge-feature rows shuffled by a uniform permutation; adjacency untouched.
FlowGraph corrupt(const FlowGraph& graph, std::uint64_t seed);
/// Row i of the result's features is row permutation[i] of the input's.
FlowGraph corrupt_with(const FlowGraph& graph, std::span<const std::size_t> permutation);

/// sigmoid of the column mean.
RowVector readout(const Matrix& embeddings);

double discriminate(const RowVector& z, const RowVector& summary, const Matrix& w);

/// Scores are clamped to [eps, 1 - eps] with eps = 1e-12 before the logs.
double dgi_loss(std::span<const double> pos_scores, std::span<const double> neg_scores);

inline constexpr double kScoreClamp = 1e-12;

struct DgiGradients {
  std::vector<Matrix> encoder;  // one per W^k
  Matrix discriminator;
};

/// The fixed compute graph: encoder on the true and corrupted graphs, summary
/// from the true graph, bilinear scores for every directed edge, BCE loss.
/// forward() records what backward() needs; both graphs must outlive the tape.
class DgiObjective {
 public:
  DgiObjective(EncoderConfig config, ReadoutSource readout);

  double forward(const FlowGraph& graph, const FlowGraph& corrupted, const EncoderParams& encoder,
                 const DiscriminatorParams& discriminator);
  DgiGradients backward() const;

  bool has_tape() const { return tape_.has_value(); }
  const Vector& positive_scores() const;
  const Vector& negative_scores() const;
  const RowVector& summary() const;

 private:
  struct Tape {
    const FlowGraph* graph;
    const FlowGraph* corrupted;
    EncoderParams encoder;
    Matrix w;
    EncoderTrace pos;
    EncoderTrace neg;
    RowVector summary;
    Vector ws;
    Vector pos_scores;
    Vector neg_scores;
  };

  const Tape& tape() const;

  EncoderConfig config_;
  ReadoutSource readout_;
  std::optional<Tape> tape_;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  EncoderParams encoder;
  DiscriminatorParams discriminator;
  std::vector<double> loss_trace;  // one entry per epoch, loss before that epoch's update
  std::int64_t optimizer_steps = 0;
};

TrainResult train(const FlowGraph& graph, const EncoderConfig& encoder_config, const TrainConfig& train_config);

/// Seed used for the corruption permutation of a given (1-based) epoch.
std::uint64_t epoch_corruption_seed(std::uint64_t master_seed, int epoch);

}  // namespace anomale
