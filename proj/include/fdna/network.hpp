#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "fdna/catalog.hpp"

namespace fdna {

enum class Activation { relu, identity };

enum class Mode { train, infer };

struct LayerSpec {
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  Activation activation = Activation::relu;
  double dropout_rate = 0.0;  // inverted dropout on the layer output
};

struct Layer {
  LayerSpec spec;
  std::vector<double> weights;  // out_width x in_width, row-major
  std::vector<double> bias;     // out_width
};

struct EmbeddingModel {
  std::vector<Layer> layers;
  std::uint64_t init_seed = 0;
  std::uint64_t input_checksum = 0;  // vocabulary/feature checksum, 0 = unset

  std::size_t input_width() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
};

struct ForwardCache {
  SparseVec sparse_input;
  std::vector<double> dense_input;
  bool sparse = false;
  bool train_mode = false;
  std::vector<std::vector<double>> pre;   // per layer, before activation
  std::vector<std::vector<double>> post;  // per layer, after act + dropout
  std::vector<std::vector<double>> mask;  // dropout multipliers, may be empty
};

// f = f(x; theta). Train mode applies inverted dropout from dropout_seed so
// inference needs no rescaling; infer mode is deterministic.
std::vector<double> forward(const EmbeddingModel& model, const SparseVec& x,
                            Mode mode, std::uint64_t dropout_seed,
                            ForwardCache* cache = nullptr);
std::vector<double> forward(const EmbeddingModel& model,
                            std::span<const double> x, Mode mode,
                            std::uint64_t dropout_seed,
                            ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<std::vector<double>> weights;  // per layer, same shapes
  std::vector<std::vector<double>> bias;
  std::vector<double> input;  // empty for sparse inputs
};

Gradients make_gradients(const EmbeddingModel& model);
void zero_gradients(Gradients& grads);

// Backpropagation through the cached forward pass; dropout masks are reused.
Gradients backward(const EmbeddingModel& model, const ForwardCache& cache,
                   std::span<const double> output_grad);
void backward_accumulate(const EmbeddingModel& model,
                         const ForwardCache& cache,
                         std::span<const double> output_grad,
                         Gradients& accum);

enum class ScaleRule { he, fixed };

double he_sigma(std::size_t fan_in);

// Gaussian weights (He scaling by default), zero biases, deterministic.
EmbeddingModel init_model(const std::vector<LayerSpec>& specs,
                          std::uint64_t seed,
                          ScaleRule rule = ScaleRule::he,
                          double fixed_sigma = 0.0);

// Geometric taper input -> d over layer_count fully connected layers, ReLU
// throughout, dropout on hidden layers only.
std::vector<LayerSpec> taper_layer_specs(std::size_t input_width,
                                         std::size_t output_dim,
                                         int layer_count,
                                         double hidden_dropout);

// Pluggable dense feature channel (stands in for the image network).
struct FeatureChannel {
  std::size_t width = 0;
  std::vector<std::string> ids;  // file order
  std::vector<double> data;      // ids.size() x width
  std::unordered_map<std::string, std::size_t> index;

  bool has(const std::string& id) const { return index.count(id) > 0; }
  std::span<const double> get(const std::string& id) const;
  std::uint64_t checksum() const;
};

// Delimited text: item_id v1 ... vk, one item per line, fixed width.
FeatureChannel load_features(std::istream& in);
FeatureChannel load_features_file(const std::string& path);

// Two frozen channels merged by one trainable fully connected ReLU layer.
struct CombinedModel {
  EmbeddingModel channel_a;
  std::variant<EmbeddingModel, FeatureChannel> channel_b;
  Layer merge;
  std::uint64_t init_seed = 0;

  std::size_t output_dim() const { return merge.spec.out_width; }
  std::size_t channel_b_width() const;
};

struct CombinedCache {
  std::vector<double> concat;     // merge input
  std::vector<double> merge_pre;  // merge pre-activation
};

// Input for channel B: a sparse encoding when channel B is a network, an
// item id when it is a precomputed feature channel.
struct ChannelBInput {
  const SparseVec* sparse = nullptr;
  const std::string* item_id = nullptr;
};

CombinedModel make_combined(EmbeddingModel channel_a,
                            std::variant<EmbeddingModel, FeatureChannel>
                                channel_b,
                            std::size_t output_dim, std::uint64_t seed,
                            ScaleRule rule = ScaleRule::he);

// Channels run frozen (inference mode); only merge weights see gradients.
std::vector<double> forward_combined(const CombinedModel& model,
                                     const SparseVec& input_a,
                                     const ChannelBInput& input_b,
                                     CombinedCache* cache = nullptr);

struct MergeGradients {
  std::vector<double> weights;
  std::vector<double> bias;
};

MergeGradients backward_combined(const CombinedModel& model,
                                 const CombinedCache& cache,
                                 std::span<const double> output_grad);
void backward_combined_accumulate(const CombinedModel& model,
                                  const CombinedCache& cache,
                                  std::span<const double> output_grad,
                                  MergeGradients& accum);

}  // namespace fdna
