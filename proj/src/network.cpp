#include "fdna/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "fdna/errors.hpp"
#include "fdna/rng.hpp"

namespace fdna {

std::size_t EmbeddingModel::input_width() const {
  return layers.empty() ? 0 : layers.front().spec.in_width;
}

std::size_t EmbeddingModel::output_dim() const {
  return layers.empty() ? 0 : layers.back().spec.out_width;
}

std::size_t EmbeddingModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

namespace {

void apply_layer_dense(const Layer& layer, const double* in, double* out) {
  const std::size_t rows = layer.spec.out_width;
  const std::size_t cols = layer.spec.in_width;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* w = layer.weights.data() + r * cols;
    double acc = layer.bias[r];
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * in[c];
    out[r] = acc;
  }
}

void apply_layer_sparse(const Layer& layer, const SparseVec& in,
                        double* out) {
  const std::size_t rows = layer.spec.out_width;
  const std::size_t cols = layer.spec.in_width;
  std::copy(layer.bias.begin(), layer.bias.end(), out);
  for (const auto& [idx, value] : in.entries) {
    const double* w_col = layer.weights.data() + idx;
    for (std::size_t r = 0; r < rows; ++r) {
      out[r] += w_col[r * cols] * value;
    }
  }
}

std::vector<double> run_forward(const EmbeddingModel& model,
                                const SparseVec* sparse,
                                std::span<const double> dense, Mode mode,
                                std::uint64_t dropout_seed,
                                ForwardCache* cache) {
  if (model.layers.empty()) throw data_error("forward: model has no layers");
  const std::size_t in_width = model.input_width();
  if (sparse) {
    if (sparse->size != in_width) {
      throw data_error("forward: input width " +
                       std::to_string(sparse->size) + " != model input " +
                       std::to_string(in_width));
    }
  } else if (dense.size() != in_width) {
    throw data_error("forward: input width " + std::to_string(dense.size()) +
                     " != model input " + std::to_string(in_width));
  }

  if (cache) {
    cache->sparse = sparse != nullptr;
    if (sparse) {
      cache->sparse_input = *sparse;
      cache->dense_input.clear();
    } else {
      cache->dense_input.assign(dense.begin(), dense.end());
    }
    cache->train_mode = mode == Mode::train;
    cache->pre.assign(model.layers.size(), {});
    cache->post.assign(model.layers.size(), {});
    cache->mask.assign(model.layers.size(), {});
  }

  std::vector<double> current;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    std::vector<double> z(layer.spec.out_width);
    if (l == 0 && sparse) {
      apply_layer_sparse(layer, *sparse, z.data());
    } else if (l == 0) {
      apply_layer_dense(layer, dense.data(), z.data());
    } else {
      if (current.size() != layer.spec.in_width) {
        throw data_error("forward: layer width mismatch at layer " +
                         std::to_string(l));
      }
      apply_layer_dense(layer, current.data(), z.data());
    }
    if (cache) cache->pre[l] = z;

    std::vector<double> a(z.size());
    if (layer.spec.activation == Activation::relu) {
      for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::max(0.0, z[i]);
    } else {
      a = z;
    }
    if (mode == Mode::train && layer.spec.dropout_rate > 0.0) {
      const double keep = 1.0 - layer.spec.dropout_rate;
      Rng rng(mix_seed(dropout_seed, 0xd20b, l));
      std::vector<double> mask(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
        a[i] *= mask[i];
      }
      if (cache) cache->mask[l] = std::move(mask);
    }
    if (cache) cache->post[l] = a;
    current = std::move(a);
  }
  return current;
}

}  // namespace

std::vector<double> forward(const EmbeddingModel& model, const SparseVec& x,
                            Mode mode, std::uint64_t dropout_seed,
                            ForwardCache* cache) {
  return run_forward(model, &x, {}, mode, dropout_seed, cache);
}

std::vector<double> forward(const EmbeddingModel& model,
                            std::span<const double> x, Mode mode,
                            std::uint64_t dropout_seed, ForwardCache* cache) {
  return run_forward(model, nullptr, x, mode, dropout_seed, cache);
}

Gradients make_gradients(const EmbeddingModel& model) {
  Gradients g;
  g.weights.reserve(model.layers.size());
  g.bias.reserve(model.layers.size());
  for (const auto& l : model.layers) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

void zero_gradients(Gradients& grads) {
  for (auto& w : grads.weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : grads.bias) std::fill(b.begin(), b.end(), 0.0);
  std::fill(grads.input.begin(), grads.input.end(), 0.0);
}

void backward_accumulate(const EmbeddingModel& model,
                         const ForwardCache& cache,
                         std::span<const double> output_grad,
                         Gradients& accum) {
  if (cache.pre.size() != model.layers.size() || model.layers.empty()) {
    throw data_error("backward: forward cache missing or stale");
  }
  if (output_grad.size() != model.output_dim()) {
    throw data_error("backward: output gradient width mismatch");
  }

  std::vector<double> g(output_grad.begin(), output_grad.end());
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Layer& layer = model.layers[l];
    if (!cache.mask[l].empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= cache.mask[l][i];
    }
    if (layer.spec.activation == Activation::relu) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (cache.pre[l][i] <= 0.0) g[i] = 0.0;
      }
    }
    auto& dW = accum.weights[l];
    auto& db = accum.bias[l];
    const std::size_t cols = layer.spec.in_width;
    for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];

    if (l == 0) {
      if (cache.sparse) {
        for (const auto& [idx, value] : cache.sparse_input.entries) {
          for (std::size_t r = 0; r < g.size(); ++r) {
            dW[r * cols + idx] += g[r] * value;
          }
        }
      } else {
        const auto& in = cache.dense_input;
        for (std::size_t r = 0; r < g.size(); ++r) {
          const double gr = g[r];
          double* row = dW.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) row[c] += gr * in[c];
        }
        if (accum.input.size() == cols) {
          for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < g.size(); ++r) {
              acc += layer.weights[r * cols + c] * g[r];
            }
            accum.input[c] += acc;
          }
        }
      }
      break;
    }

    const auto& in = cache.post[l - 1];
    for (std::size_t r = 0; r < g.size(); ++r) {
      const double gr = g[r];
      double* row = dW.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) row[c] += gr * in[c];
    }
    std::vector<double> g_prev(cols, 0.0);
    for (std::size_t r = 0; r < g.size(); ++r) {
      const double gr = g[r];
      const double* row = layer.weights.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) g_prev[c] += row[c] * gr;
    }
    g = std::move(g_prev);
  }
}

Gradients backward(const EmbeddingModel& model, const ForwardCache& cache,
                   std::span<const double> output_grad) {
  Gradients g = make_gradients(model);
  if (!cache.sparse) g.input.assign(model.input_width(), 0.0);
  backward_accumulate(model, cache, output_grad, g);
  return g;
}

double he_sigma(std::size_t fan_in) {
  return std::sqrt(2.0 / static_cast<double>(fan_in));
}

EmbeddingModel init_model(const std::vector<LayerSpec>& specs,
                          std::uint64_t seed, ScaleRule rule,
                          double fixed_sigma) {
  if (specs.empty()) throw data_error("init_model: no layers");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    if (specs[l].in_width == 0 || specs[l].out_width == 0) {
      throw data_error("init_model: zero-width layer " + std::to_string(l));
    }
    if (l > 0 && specs[l].in_width != specs[l - 1].out_width) {
      throw data_error("init_model: widths of layers " +
                       std::to_string(l - 1) + " and " + std::to_string(l) +
                       " do not match");
    }
    if (specs[l].dropout_rate < 0.0 || specs[l].dropout_rate >= 1.0) {
      throw data_error("init_model: dropout rate outside [0,1)");
    }
  }
  EmbeddingModel model;
  model.init_seed = seed;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    Layer layer;
    layer.spec = specs[l];
    layer.weights.resize(specs[l].out_width * specs[l].in_width);
    layer.bias.assign(specs[l].out_width, 0.0);
    const double sigma = rule == ScaleRule::he
                             ? he_sigma(specs[l].in_width)
                             : fixed_sigma;
    Rng rng(mix_seed(seed, 0x11a7, l));
    for (double& w : layer.weights) w = rng.normal() * sigma;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

std::vector<LayerSpec> taper_layer_specs(std::size_t input_width,
                                         std::size_t output_dim,
                                         int layer_count,
                                         double hidden_dropout) {
  if (input_width == 0 || output_dim == 0 || layer_count < 1) {
    throw data_error("taper_layer_specs: invalid shape");
  }
  std::vector<LayerSpec> specs;
  std::size_t prev = input_width;
  for (int l = 1; l <= layer_count; ++l) {
    const double t = static_cast<double>(l) / layer_count;
    std::size_t width = static_cast<std::size_t>(std::llround(
        std::exp((1.0 - t) * std::log(static_cast<double>(input_width)) +
                 t * std::log(static_cast<double>(output_dim)))));
    if (l == layer_count) width = output_dim;
    width = std::max<std::size_t>(1, width);
    LayerSpec spec;
    spec.in_width = prev;
    spec.out_width = width;
    spec.activation = Activation::relu;
    spec.dropout_rate = l == layer_count ? 0.0 : hidden_dropout;
    specs.push_back(spec);
    prev = width;
  }
  return specs;
}

std::span<const double> FeatureChannel::get(const std::string& id) const {
  const auto it = index.find(id);
  if (it == index.end()) {
    throw data_error("feature channel missing item '" + id + "'");
  }
  return {data.data() + it->second * width, width};
}

std::uint64_t FeatureChannel::checksum() const {
  std::uint64_t h = fnv1a64_doubles(data.data(), data.size());
  for (const auto& id : ids) h = fnv1a64(id.data(), id.size(), h);
  return h;
}

FeatureChannel load_features(std::istream& in) {
  FeatureChannel channel;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id;
    row >> id;
    std::vector<double> values;
    double v;
    while (row >> v) values.push_back(v);
    if (values.empty()) {
      throw data_error("features line " + std::to_string(line_no) +
                       ": no values");
    }
    if (channel.width == 0) channel.width = values.size();
    if (values.size() != channel.width) {
      throw data_error("features line " + std::to_string(line_no) +
                       ": width " + std::to_string(values.size()) +
                       " != " + std::to_string(channel.width));
    }
    if (channel.index.count(id)) {
      throw data_error("features line " + std::to_string(line_no) +
                       ": duplicate item '" + id + "'");
    }
    channel.index[id] = channel.ids.size();
    channel.ids.push_back(id);
    channel.data.insert(channel.data.end(), values.begin(), values.end());
  }
  if (channel.ids.empty()) throw data_error("features: empty file");
  return channel;
}

FeatureChannel load_features_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open features file: " + path);
  return load_features(in);
}

std::size_t CombinedModel::channel_b_width() const {
  if (const auto* m = std::get_if<EmbeddingModel>(&channel_b)) {
    return m->output_dim();
  }
  return std::get<FeatureChannel>(channel_b).width;
}

CombinedModel make_combined(EmbeddingModel channel_a,
                            std::variant<EmbeddingModel, FeatureChannel>
                                channel_b,
                            std::size_t output_dim, std::uint64_t seed,
                            ScaleRule rule) {
  CombinedModel model;
  model.channel_a = std::move(channel_a);
  model.channel_b = std::move(channel_b);
  model.init_seed = seed;
  const std::size_t in_width =
      model.channel_a.output_dim() + model.channel_b_width();
  LayerSpec spec;
  spec.in_width = in_width;
  spec.out_width = output_dim;
  spec.activation = Activation::relu;
  spec.dropout_rate = 0.0;
  model.merge.spec = spec;
  model.merge.weights.resize(in_width * output_dim);
  model.merge.bias.assign(output_dim, 0.0);
  const double sigma =
      rule == ScaleRule::he ? he_sigma(in_width) : 0.01;
  Rng rng(mix_seed(seed, 0xc0b1));
  for (double& w : model.merge.weights) w = rng.normal() * sigma;
  return model;
}

std::vector<double> forward_combined(const CombinedModel& model,
                                     const SparseVec& input_a,
                                     const ChannelBInput& input_b,
                                     CombinedCache* cache) {
  const std::vector<double> fa =
      forward(model.channel_a, input_a, Mode::infer, 0);

  std::vector<double> fb;
  if (const auto* mb = std::get_if<EmbeddingModel>(&model.channel_b)) {
    if (!input_b.sparse) {
      throw data_error("forward_combined: channel B needs an encoded input");
    }
    fb = forward(*mb, *input_b.sparse, Mode::infer, 0);
  } else {
    if (!input_b.item_id) {
      throw data_error("forward_combined: channel B needs an item id");
    }
    const auto features =
        std::get<FeatureChannel>(model.channel_b).get(*input_b.item_id);
    fb.assign(features.begin(), features.end());
  }

  std::vector<double> concat;
  concat.reserve(fa.size() + fb.size());
  concat.insert(concat.end(), fa.begin(), fa.end());
  concat.insert(concat.end(), fb.begin(), fb.end());
  if (concat.size() != model.merge.spec.in_width) {
    throw data_error("forward_combined: merge input width mismatch");
  }

  std::vector<double> z(model.merge.spec.out_width);
  apply_layer_dense(model.merge, concat.data(), z.data());
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::max(0.0, z[i]);

  if (cache) {
    cache->concat = std::move(concat);
    cache->merge_pre = std::move(z);
  }
  return out;
}

void backward_combined_accumulate(const CombinedModel& model,
                                  const CombinedCache& cache,
                                  std::span<const double> output_grad,
                                  MergeGradients& accum) {
  if (cache.concat.empty()) {
    throw data_error("backward_combined: forward cache missing");
  }
  const std::size_t rows = model.merge.spec.out_width;
  const std::size_t cols = model.merge.spec.in_width;
  if (output_grad.size() != rows) {
    throw data_error("backward_combined: output gradient width mismatch");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = cache.merge_pre[r] > 0.0 ? output_grad[r] : 0.0;
    accum.bias[r] += g;
    double* row = accum.weights.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += g * cache.concat[c];
  }
}

MergeGradients backward_combined(const CombinedModel& model,
                                 const CombinedCache& cache,
                                 std::span<const double> output_grad) {
  MergeGradients g;
  g.weights.assign(model.merge.weights.size(), 0.0);
  g.bias.assign(model.merge.bias.size(), 0.0);
  backward_combined_accumulate(model, cache, output_grad, g);
  return g;
}

}  // namespace fdna
