#include "fdna/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

#include "fdna/binio.hpp"
#include "fdna/errors.hpp"
#include "fdna/evaluation.hpp"
#include "fdna/mathutil.hpp"
#include "fdna/rng.hpp"

namespace fdna {

std::vector<TagFamilyGen> default_families_a(double tau) {
  return {{"brand", 40, tau, 1.0},
          {"commodity_group", 30, tau, 1.0},
          {"color", 20, tau, 1.0},
          {"pattern", 12, tau, 0.85}};
}

std::vector<TagFamilyGen> default_families_b(double tau) {
  return {{"feat0", 16, tau, 1.0}, {"feat1", 16, tau, 1.0}};
}

namespace {

std::string pad_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%06zu", prefix, i);
  return buf;
}

std::vector<double> family_logits(const PlantedWorld& world,
                                  const std::vector<double>& map,
                                  const TagFamilyGen& family,
                                  std::size_t item) {
  const std::size_t r = world.config.rank;
  std::vector<double> logits(family.classes);
  const double* u = world.item_latents.data() + item * r;
  for (std::size_t c = 0; c < family.classes; ++c) {
    logits[c] = dot(map.data() + c * r, u, r) / family.tau;
  }
  return logits;
}

std::int32_t draw_class(const std::vector<double>& logits, Rng& rng) {
  double max_logit = logits[0];
  for (double v : logits) max_logit = std::max(max_logit, v);
  double total = 0.0;
  std::vector<double> weights(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    weights[c] = std::exp(logits[c] - max_logit);
    total += weights[c];
  }
  const double r = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    cum += weights[c];
    if (r < cum) return static_cast<std::int32_t>(c);
  }
  return static_cast<std::int32_t>(logits.size() - 1);
}

void draw_tags(PlantedWorld& world,
               const std::vector<TagFamilyGen>& families,
               const std::vector<std::vector<double>>& maps,
               std::vector<std::vector<std::int32_t>>& tags,
               std::uint64_t stream) {
  const std::size_t n = world.config.items;
  tags.assign(families.size(), std::vector<std::int32_t>(n, -1));
  for (std::size_t f = 0; f < families.size(); ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(mix_seed(world.config.seed, stream, f, i));
      if (families[f].coverage < 1.0 &&
          rng.uniform() >= families[f].coverage) {
        continue;
      }
      tags[f][i] = draw_class(family_logits(world, maps[f], families[f], i),
                              rng);
    }
  }
}

}  // namespace

double PlantedWorld::pair_logit(std::size_t item, std::size_t customer) const {
  const std::size_t r = config.rank;
  return dot(item_latents.data() + item * r,
             customer_latents.data() + customer * r, r) +
         customer_biases[customer];
}

double PlantedWorld::true_probability(std::size_t item,
                                      std::size_t customer) const {
  return (1.0 - config.noise_level) * sigmoid(pair_logit(item, customer)) +
         config.noise_level * config.target_density;
}

double PlantedWorld::min_true_probability() const {
  double min_p = 1.0;
  for (std::size_t i = 0; i < config.items; ++i) {
    for (std::size_t j = 0; j < config.customers; ++j) {
      min_p = std::min(min_p, true_probability(i, j));
    }
  }
  return min_p;
}

std::vector<double> PlantedWorld::features_b(std::size_t item) const {
  const std::size_t width = config.feature_width;
  std::vector<double> x(width, 0.0);
  std::size_t offset = 0;
  for (std::size_t f = 0; f < config.families_b.size(); ++f) {
    const std::int32_t cls = tags_b[f][item];
    if (cls >= 0) {
      const std::size_t col = offset + static_cast<std::size_t>(cls);
      for (std::size_t t = 0; t < width; ++t) {
        x[t] += feature_projection[t * total_b_classes + col];
      }
    }
    offset += config.families_b[f].classes;
  }
  return x;
}

PlantedWorld generate_world(const WorldConfig& config) {
  if (config.items < 2 || config.customers < 2 || config.rank < 1) {
    throw data_error("generate_world: need >= 2 items, >= 2 customers, "
                     "rank >= 1");
  }
  if (!(config.target_density > 0.0 && config.target_density < 0.5)) {
    throw data_error("generate_world: target_density must lie in (0, 0.5)");
  }
  if (config.noise_level < 0.0 || config.noise_level > 1.0) {
    throw data_error("generate_world: noise_level must lie in [0,1]");
  }
  for (const auto& f : config.families) {
    if (f.classes < 1 || f.tau <= 0.0) {
      throw data_error("generate_world: bad tag family " + f.name);
    }
  }

  PlantedWorld world;
  world.config = config;
  const std::size_t n = config.items, k = config.customers, r = config.rank;

  world.item_latents.resize(n * r);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(config.seed, 0x17e0, i));
    for (std::size_t t = 0; t < r; ++t) {
      world.item_latents[i * r + t] = rng.normal();
    }
  }
  world.customer_latents.resize(k * r);
  std::vector<double> gamma(k);
  for (std::size_t j = 0; j < k; ++j) {
    Rng rng(mix_seed(config.seed, 0x2c57, j));
    for (std::size_t t = 0; t < r; ++t) {
      world.customer_latents[j * r + t] = rng.normal();
    }
    gamma[j] = rng.normal() * config.bias_sigma;
  }

  // calibrate the global bias shift so the sigmoid part of the mean pair
  // probability meets the target density
  {
    std::vector<double> logits;
    const bool cache = n * k <= (std::size_t{1} << 22);
    if (cache) {
      logits.resize(n * k);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          logits[i * k + j] =
              dot(world.item_latents.data() + i * r,
                  world.customer_latents.data() + j * r, r) +
              gamma[j];
        }
      }
    }
    auto mean_prob = [&](double shift) {
      double sum = 0.0;
      if (cache) {
        for (double z : logits) sum += sigmoid(z + shift);
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            sum += sigmoid(dot(world.item_latents.data() + i * r,
                               world.customer_latents.data() + j * r, r) +
                           gamma[j] + shift);
          }
        }
      }
      return sum / (static_cast<double>(n) * static_cast<double>(k));
    };

    double lo = -700.0, hi = 700.0, shift = 0.0;
    bool done = false;
    for (int iter = 0; iter < 200; ++iter) {
      shift = 0.5 * (lo + hi);
      const double mean = mean_prob(shift);
      if (std::abs(mean - config.target_density) <=
          0.02 * config.target_density) {
        done = true;
        break;
      }
      if (mean > config.target_density) {
        hi = shift;
      } else {
        lo = shift;
      }
    }
    if (!done) {
      throw numeric_error("generate_world: bias calibration did not reach "
                          "the target density");
    }
    world.customer_biases.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
      world.customer_biases[j] = gamma[j] + shift;
    }
  }

  // tag maps and tags
  world.tag_maps_a.resize(config.families.size());
  for (std::size_t f = 0; f < config.families.size(); ++f) {
    Rng rng(mix_seed(config.seed, 0x3a11, f));
    auto& map = world.tag_maps_a[f];
    map.resize(config.families[f].classes * r);
    for (double& v : map) v = rng.normal();
  }
  world.tag_maps_b.resize(config.families_b.size());
  for (std::size_t f = 0; f < config.families_b.size(); ++f) {
    Rng rng(mix_seed(config.seed, 0x3b22, f));
    auto& map = world.tag_maps_b[f];
    map.resize(config.families_b[f].classes * r);
    for (double& v : map) v = rng.normal();
  }
  draw_tags(world, config.families, world.tag_maps_a, world.tags_a, 0x7a50);
  draw_tags(world, config.families_b, world.tag_maps_b, world.tags_b,
            0x7b60);

  // latent-correlated prices (ln space) and fiber compositions
  {
    Rng dir_rng(mix_seed(config.seed, 0x6d1));
    std::vector<double> dir(r);
    double norm = 0.0;
    for (double& v : dir) {
      v = dir_rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : dir) v /= norm;
    world.prices.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(mix_seed(config.seed, 0x6d2, i));
      const double ln_price =
          config.price_base +
          config.price_latent_scale *
              dot(dir.data(), world.item_latents.data() + i * r, r) +
          config.price_noise * rng.normal();
      world.prices[i] = std::exp(ln_price);
    }
  }
  if (config.fiber_count > 0) {
    Rng map_rng(mix_seed(config.seed, 0x61b));
    std::vector<double> fiber_map(config.fiber_count * r);
    for (double& v : fiber_map) v = map_rng.normal();
    world.fibers.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(mix_seed(config.seed, 0x61c, i));
      if (rng.uniform() >= config.fiber_coverage) continue;
      std::vector<double> logits(config.fiber_count);
      for (std::size_t c = 0; c < config.fiber_count; ++c) {
        logits[c] = (dot(fiber_map.data() + c * r,
                         world.item_latents.data() + i * r, r) +
                     0.3 * rng.normal()) /
                    config.fiber_tau;
      }
      double max_logit = logits[0];
      for (double v : logits) max_logit = std::max(max_logit, v);
      double total = 0.0;
      std::vector<double> comp(config.fiber_count);
      for (std::size_t c = 0; c < config.fiber_count; ++c) {
        comp[c] = std::exp(logits[c] - max_logit);
        total += comp[c];
      }
      for (double& v : comp) v /= total;
      world.fibers[i] = std::move(comp);
    }
  } else {
    world.fibers.resize(n);
  }

  // dense projection for the second channel
  {
    std::size_t total_classes = 0;
    for (const auto& f : config.families_b) total_classes += f.classes;
    world.total_b_classes = total_classes;
    Rng rng(mix_seed(config.seed, 0x9f3));
    world.feature_projection.resize(config.feature_width * total_classes);
    const double scale =
        config.feature_width > 0
            ? 1.0 / std::sqrt(static_cast<double>(config.feature_width))
            : 1.0;
    for (double& v : world.feature_projection) v = rng.normal() * scale;
  }

  world.item_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    world.item_ids.push_back(pad_id("item_", i));
  }
  world.customer_ids.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    world.customer_ids.push_back(pad_id("cust_", j));
  }
  return world;
}

PurchaseMatrix sample_purchases(const PlantedWorld& world,
                                std::uint64_t seed) {
  const std::size_t n = world.config.items, k = world.config.customers;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, 0xb011, i));
    for (std::size_t j = 0; j < k; ++j) {
      if (rng.uniform() < world.true_probability(i, j)) {
        entries.emplace_back(static_cast<std::uint32_t>(i),
                             static_cast<std::uint32_t>(j));
      }
    }
  }
  return make_matrix(world.item_ids, world.customer_ids, std::move(entries));
}

namespace {

void collect_quadrant_scores(const PlantedWorld& world,
                             const QuadrantSplit& split, Quadrant which,
                             std::vector<double>* scores,
                             std::vector<std::pair<std::uint32_t,
                                                   std::uint32_t>>* pairs) {
  const bool item_val = which == Quadrant::vt || which == Quadrant::vv;
  const bool cust_val = which == Quadrant::tv || which == Quadrant::vv;
  const auto& items = item_val ? split.item_val : split.item_train;
  const auto& customers =
      cust_val ? split.customer_val : split.customer_train;
  scores->reserve(items.size() * customers.size());
  pairs->reserve(items.size() * customers.size());
  for (std::uint32_t i : items) {
    for (std::uint32_t j : customers) {
      scores->push_back(world.true_probability(i, j));
      pairs->emplace_back(i, j);
    }
  }
}

}  // namespace

double oracle_auc(const PlantedWorld& world, const PurchaseMatrix& labels,
                  const QuadrantSplit& split, Quadrant which) {
  if (world.config.items * world.config.customers > 10'000'000ULL) {
    throw data_error("oracle_auc: world too large for exact enumeration");
  }
  std::vector<double> scores;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  collect_quadrant_scores(world, split, which, &scores, &pairs);
  std::vector<std::uint8_t> y(pairs.size());
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    y[t] = labels.has(pairs[t].first, pairs[t].second) ? 1 : 0;
  }
  return auc_score(scores, y);
}

double oracle_auc_fresh(const PlantedWorld& world, const QuadrantSplit& split,
                        Quadrant which, std::uint64_t seed) {
  if (world.config.items * world.config.customers > 10'000'000ULL) {
    throw data_error("oracle_auc: world too large for exact enumeration");
  }
  std::vector<double> scores;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  collect_quadrant_scores(world, split, which, &scores, &pairs);
  std::vector<std::uint8_t> y(pairs.size());
  Rng rng(mix_seed(seed, 0xf2e5));
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    y[t] = rng.uniform() < scores[t] ? 1 : 0;
  }
  return auc_score(scores, y);
}

namespace {

std::string tag_label(const TagFamilyGen& family, std::int32_t cls) {
  return family.name.substr(0, 1) + std::to_string(cls);
}

}  // namespace

void export_catalog(const PlantedWorld& world, std::ostream& out) {
  const auto& families = world.config.families;
  for (const auto& f : families) {
    if (f.name != "brand" && f.name != "commodity_group" &&
        f.name != "color" && f.name != "pattern") {
      throw data_error("export_catalog: unsupported tag family " + f.name);
    }
  }
  for (std::size_t i = 0; i < world.config.items; ++i) {
    out << "{\"item_id\":\"" << world.item_ids[i] << "\"";
    for (std::size_t f = 0; f < families.size(); ++f) {
      const std::int32_t cls = world.tags_a[f][i];
      if (cls < 0) continue;
      out << ",\"" << families[f].name << "\":\""
          << tag_label(families[f], cls) << "\"";
    }
    out << ",\"price\":" << fmt_double(world.prices[i]);
    if (!world.fibers[i].empty()) {
      out << ",\"fibers\":{";
      bool first = true;
      for (std::size_t c = 0; c < world.fibers[i].size(); ++c) {
        if (world.fibers[i][c] == 0.0) continue;
        if (!first) out << ",";
        first = false;
        out << "\"fib" << c << "\":" << fmt_double(world.fibers[i][c]);
      }
      out << "}";
    }
    out << "}\n";
  }
}

void export_purchases(const PurchaseMatrix& matrix, std::ostream& out) {
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    for (std::uint32_t j : matrix.row(i)) {
      out << matrix.customer_ids[j] << ',' << matrix.item_ids[i] << '\n';
    }
  }
}

void export_features(const PlantedWorld& world, std::ostream& out) {
  for (std::size_t i = 0; i < world.config.items; ++i) {
    out << world.item_ids[i];
    for (double v : world.features_b(i)) out << ' ' << fmt_double(v);
    out << '\n';
  }
}

void save_world(const PlantedWorld& world, const std::string& path) {
  BinWriter w;
  w.bytes("FDNAWRLD", 8);
  w.u32(1);
  const auto& c = world.config;
  w.u64(c.items);
  w.u64(c.customers);
  w.u64(c.rank);
  w.u64(c.feature_width);
  w.u64(c.fiber_count);
  w.f64(c.noise_level);
  w.f64(c.target_density);
  w.f64(c.bias_sigma);
  w.f64(c.fiber_tau);
  w.f64(c.fiber_coverage);
  w.f64(c.price_base);
  w.f64(c.price_latent_scale);
  w.f64(c.price_noise);
  w.u64(c.seed);
  auto write_families = [&](const std::vector<TagFamilyGen>& families) {
    w.u64(families.size());
    for (const auto& f : families) {
      w.str(f.name);
      w.u64(f.classes);
      w.f64(f.tau);
      w.f64(f.coverage);
    }
  };
  write_families(c.families);
  write_families(c.families_b);
  w.f64s(world.item_latents);
  w.f64s(world.customer_latents);
  w.f64s(world.customer_biases);
  w.u64(world.tag_maps_a.size());
  for (const auto& m : world.tag_maps_a) w.f64s(m);
  w.u64(world.tag_maps_b.size());
  for (const auto& m : world.tag_maps_b) w.f64s(m);
  w.u64(world.tags_a.size());
  for (const auto& t : world.tags_a) w.i32s(t);
  w.u64(world.tags_b.size());
  for (const auto& t : world.tags_b) w.i32s(t);
  w.f64s(world.prices);
  w.u64(world.fibers.size());
  for (const auto& f : world.fibers) w.f64s(f);
  w.f64s(world.feature_projection);
  w.u64(world.total_b_classes);
  w.write_file(path);
}

PlantedWorld load_world(const std::string& path) {
  BinReader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, "FDNAWRLD", 8) != 0) {
    throw data_error("not a world artifact: " + path);
  }
  if (r.u32() != 1) throw data_error("unsupported world version in " + path);
  PlantedWorld world;
  auto& c = world.config;
  c.items = r.u64();
  c.customers = r.u64();
  c.rank = r.u64();
  c.feature_width = r.u64();
  c.fiber_count = r.u64();
  c.noise_level = r.f64();
  c.target_density = r.f64();
  c.bias_sigma = r.f64();
  c.fiber_tau = r.f64();
  c.fiber_coverage = r.f64();
  c.price_base = r.f64();
  c.price_latent_scale = r.f64();
  c.price_noise = r.f64();
  c.seed = r.u64();
  auto read_families = [&]() {
    std::vector<TagFamilyGen> families(r.u64());
    for (auto& f : families) {
      f.name = r.str();
      f.classes = r.u64();
      f.tau = r.f64();
      f.coverage = r.f64();
    }
    return families;
  };
  c.families = read_families();
  c.families_b = read_families();
  world.item_latents = r.f64s();
  world.customer_latents = r.f64s();
  world.customer_biases = r.f64s();
  world.tag_maps_a.resize(r.u64());
  for (auto& m : world.tag_maps_a) m = r.f64s();
  world.tag_maps_b.resize(r.u64());
  for (auto& m : world.tag_maps_b) m = r.f64s();
  world.tags_a.resize(r.u64());
  for (auto& t : world.tags_a) t = r.i32s();
  world.tags_b.resize(r.u64());
  for (auto& t : world.tags_b) t = r.i32s();
  world.prices = r.f64s();
  world.fibers.resize(r.u64());
  for (auto& f : world.fibers) f = r.f64s();
  world.feature_projection = r.f64s();
  world.total_b_classes = r.u64();
  world.item_ids.reserve(c.items);
  for (std::size_t i = 0; i < c.items; ++i) {
    world.item_ids.push_back(pad_id("item_", i));
  }
  world.customer_ids.reserve(c.customers);
  for (std::size_t j = 0; j < c.customers; ++j) {
    world.customer_ids.push_back(pad_id("cust_", j));
  }
  return world;
}

std::string world_manifest(const PlantedWorld& world) {
  const auto& c = world.config;
  std::ostringstream out;
  out << "planted world\n";
  out << "items " << c.items << "\ncustomers " << c.customers << "\nrank "
      << c.rank << "\n";
  out << "target_density " << fmt_double(c.target_density) << "\n";
  out << "noise_level " << fmt_double(c.noise_level) << "\n";
  out << "seed " << c.seed << "\n";
  auto dump_families = [&](const char* head,
                           const std::vector<TagFamilyGen>& families) {
    for (const auto& f : families) {
      out << head << " " << f.name << " classes " << f.classes << " tau "
          << fmt_double(f.tau) << " coverage " << fmt_double(f.coverage)
          << "\n";
    }
  };
  dump_families("family_a", c.families);
  dump_families("family_b", c.families_b);
  out << "feature_width " << c.feature_width << "\n";
  out << "fiber_count " << c.fiber_count << "\n";
  return out.str();
}

}  // namespace fdna
