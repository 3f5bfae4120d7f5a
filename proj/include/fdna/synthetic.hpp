#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fdna/purchases.hpp"

namespace fdna {

struct TagFamilyGen {
  std::string name;
  std::size_t classes = 8;
  double tau = 0.5;       // softmax temperature: smaller = sharper = more
                          // latent information in the tag
  double coverage = 1.0;  // probability an item carries the tag
};

struct WorldConfig {
  std::size_t items = 500;
  std::size_t customers = 200;
  std::size_t rank = 8;
  std::vector<TagFamilyGen> families;    // attribute channel (catalog tags)
  std::vector<TagFamilyGen> families_b;  // second channel (dense features)
  double noise_level = 0.0;     // mixes pair probabilities toward density
  double target_density = 0.02;
  std::uint64_t seed = 1;
  std::size_t feature_width = 32;  // dense projection width for channel B
  double bias_sigma = 0.25;
  // latent-correlated price and fiber generation for the catalog pipeline
  std::size_t fiber_count = 10;
  double fiber_tau = 0.5;
  double fiber_coverage = 0.7;
  double price_base = 3.5;  // ln space
  double price_latent_scale = 0.6;
  double price_noise = 0.2;
};

// four catalog tag families with the given sharpness
std::vector<TagFamilyGen> default_families_a(double tau);
// two feature families feeding the dense channel
std::vector<TagFamilyGen> default_families_b(double tau);

struct PlantedWorld {
  WorldConfig config;
  std::vector<double> item_latents;      // N x r
  std::vector<double> customer_latents;  // K x r
  std::vector<double> customer_biases;   // K, calibration shift included
  std::vector<std::vector<double>> tag_maps_a;   // per family: classes x r
  std::vector<std::vector<double>> tag_maps_b;
  std::vector<std::vector<std::int32_t>> tags_a;  // per family per item, -1 = absent
  std::vector<std::vector<std::int32_t>> tags_b;
  std::vector<double> prices;                 // per item, positive
  std::vector<std::vector<double>> fibers;    // per item, empty = absent
  std::vector<double> feature_projection;  // feature_width x total_b_classes
  std::size_t total_b_classes = 0;
  std::vector<std::string> item_ids, customer_ids;

  double pair_logit(std::size_t item, std::size_t customer) const;
  // (1 - noise) * sigma(u.v + c) + noise * target_density
  double true_probability(std::size_t item, std::size_t customer) const;
  double min_true_probability() const;  // the density floor of the world
  std::vector<double> features_b(std::size_t item) const;  // dense channel
};

// Latents from unit Gaussians; customer biases calibrated by bisection so
// the mean pair probability lands within 2% of target_density; tags drawn
// from softmax(A u / tau) so attributes carry signal about the latents.
PlantedWorld generate_world(const WorldConfig& config);

// every entry Bernoulli(true_probability), rows sampled independently with
// per-row derived seeds
PurchaseMatrix sample_purchases(const PlantedWorld& world,
                                std::uint64_t seed);

// AUC of the true probabilities over one quadrant. Labels come from the
// given matrix (itself a sampled label set) - the Bayes ceiling a trained
// model is compared against. Enforces exact enumeration (N*K <= 1e7).
double oracle_auc(const PlantedWorld& world, const PurchaseMatrix& labels,
                  const QuadrantSplit& split, Quadrant which);

// Same oracle against freshly sampled labels.
double oracle_auc_fresh(const PlantedWorld& world, const QuadrantSplit& split,
                        Quadrant which, std::uint64_t seed);

// exports in the ingestion formats of the catalog/purchases modules
void export_catalog(const PlantedWorld& world, std::ostream& out);
void export_purchases(const PurchaseMatrix& matrix, std::ostream& out);
void export_features(const PlantedWorld& world, std::ostream& out);

// self-describing binary artifact + text manifest
void save_world(const PlantedWorld& world, const std::string& path);
PlantedWorld load_world(const std::string& path);
std::string world_manifest(const PlantedWorld& world);

}  // namespace fdna
