// fdna: command-line pipeline for content-conditioned purchase modeling.
// Subcommands compose through files only; every command is deterministic
// given its flags. Formats are documented in docs/FORMATS.md.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdna/artifacts.hpp"
#include "fdna/binio.hpp"
#include "fdna/catalog.hpp"
#include "fdna/errors.hpp"
#include "fdna/evaluation.hpp"
#include "fdna/network.hpp"
#include "fdna/parallel.hpp"
#include "fdna/purchases.hpp"
#include "fdna/rng.hpp"
#include "fdna/similarity.hpp"
#include "fdna/synthetic.hpp"
#include "fdna/training.hpp"
#include "fdna/tsne.hpp"

namespace fs = std::filesystem;
using namespace fdna;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw data_error("short write: " + path);
}

void require_directory(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw data_error("output directory does not exist: " + dir);
  }
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string out_dir;
  std::size_t items = 500;
  std::size_t customers = 200;
  std::size_t rank = 8;
  double density = 0.02;
  double noise = 0.0;
  double tau_a = 0.25;
  double tau_b = 1.0;
  std::size_t feature_width = 32;
  std::uint64_t seed = 1;
};

int cmd_gen_data(const GenDataArgs& args) {
  require_directory(args.out_dir);
  WorldConfig config;
  config.items = args.items;
  config.customers = args.customers;
  config.rank = args.rank;
  config.target_density = args.density;
  config.noise_level = args.noise;
  config.families = default_families_a(args.tau_a);
  config.families_b = default_families_b(args.tau_b);
  config.feature_width = args.feature_width;
  config.seed = args.seed;

  const PlantedWorld world = generate_world(config);
  const PurchaseMatrix matrix = sample_purchases(world,
                                                 mix_seed(args.seed, 0xa11));

  const fs::path dir(args.out_dir);
  {
    std::ostringstream out;
    export_catalog(world, out);
    write_text_file((dir / "catalog.jsonl").string(), out.str());
  }
  {
    std::ostringstream out;
    export_purchases(matrix, out);
    write_text_file((dir / "purchases.csv").string(), out.str());
  }
  {
    std::ostringstream out;
    export_features(world, out);
    write_text_file((dir / "features.txt").string(), out.str());
  }
  save_world(world, (dir / "world.bin").string());
  write_text_file((dir / "world_manifest.txt").string(),
                  world_manifest(world));

  std::cout << "gen-data: " << args.items << " items, " << args.customers
            << " customers, " << matrix.n_entries() << " purchases (density "
            << fmt_double(matrix.density()) << ")\n";
  return 0;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  std::string catalog_path, purchases_path, out_dir;
  std::string channel = "attribute";
  std::string features_path, model_a_path, resume_path;
  std::size_t dim = 256;
  int layer_count = 4;
  double dropout = 0.5;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 50;
  std::size_t batch = 32;
  std::size_t neg_subsample = 0;
  double item_val_fraction = 0.1;
  double customer_val_fraction = 0.1;
  int price_clusters = 28;
  int fabric_clusters = 80;
  std::size_t min_class_support = 50;
  double lambda = 1e-4;
  int fit_iterations = 500;
  bool skip_customer_fit = false;
  std::uint64_t seed = 1;
};

struct Pipeline {
  Catalog catalog;
  AttributeVocabulary vocab;
  std::vector<SparseVec> encodings;
  PurchaseMatrix matrix;
  QuadrantSplit split;
};

// catalog -> derived clusters -> vocabulary -> encodings -> matrix -> split
Pipeline load_pipeline(const std::string& catalog_path,
                       const std::string& purchases_path,
                       int price_clusters, int fabric_clusters,
                       std::size_t min_class_support,
                       double item_val_fraction,
                       double customer_val_fraction, std::uint64_t seed) {
  Pipeline p;
  p.catalog = load_catalog_file(catalog_path);

  bool any_price = false, any_fibers = false;
  for (const auto& item : p.catalog.items) {
    any_price = any_price || (item.raw_price && *item.raw_price > 0.0);
    any_fibers = any_fibers || !item.fibers.empty();
  }
  if (price_clusters > 0 && any_price) {
    apply_price_clusters(
        p.catalog,
        cluster_prices(p.catalog, price_clusters, mix_seed(seed, 0x9e1)));
  }
  if (fabric_clusters > 0 && any_fibers) {
    apply_fabric_clusters(
        p.catalog,
        cluster_fabrics(p.catalog, fabric_clusters, mix_seed(seed, 0x9e2)));
  }
  p.vocab = build_vocabulary(p.catalog, min_class_support);

  p.encodings.reserve(p.catalog.items.size());
  for (const auto& item : p.catalog.items) {
    p.encodings.push_back(encode_item(item, p.vocab));
  }

  p.matrix = load_purchases_file(purchases_path, p.catalog.ids());
  const ItemSplit item_split =
      split_items(p.catalog, item_val_fraction, mix_seed(seed, 0x51));
  p.split = split_customers(p.matrix, item_split.val_ids,
                            customer_val_fraction, mix_seed(seed, 0x52));
  return p;
}

std::string loss_history_text(const TrainResult& result) {
  std::ostringstream out;
  out << "loss initial " << fmt_double(result.loss_history.front()) << "\n";
  for (std::size_t e = 1; e < result.loss_history.size(); ++e) {
    out << "loss epoch " << e << " " << fmt_double(result.loss_history[e])
        << "\n";
  }
  return out.str();
}

int cmd_train(const TrainArgs& args) {
  require_directory(args.out_dir);
  const fs::path dir(args.out_dir);
  Timer timer;

  Pipeline p = load_pipeline(args.catalog_path, args.purchases_path,
                             args.price_clusters, args.fabric_clusters,
                             args.min_class_support, args.item_val_fraction,
                             args.customer_val_fraction, args.seed);

  TrainConfig config;
  config.learning_rate = args.learning_rate;
  config.momentum = args.momentum;
  config.epochs = args.epochs;
  config.item_batch_size = args.batch;
  if (args.neg_subsample > 0) config.negative_subsample = args.neg_subsample;
  config.seed = mix_seed(args.seed, 0x7a);

  std::optional<FeatureChannel> features;
  if (!args.features_path.empty()) {
    features = load_features_file(args.features_path);
  }

  std::unique_ptr<ItemEmbedder> embedder;
  EmbeddingModel model;
  CombinedModel combined;
  std::string model_file;

  if (args.channel == "attribute") {
    if (!args.resume_path.empty()) {
      model = load_model(args.resume_path);
      if (model.input_checksum != p.vocab.checksum()) {
        std::ostringstream msg;
        msg << "vocabulary mismatch: model was trained against checksum "
            << std::hex << model.input_checksum << ", catalog yields "
            << p.vocab.checksum();
        throw data_error(msg.str());
      }
    } else {
      model = init_model(
          taper_layer_specs(p.vocab.total_length, args.dim, args.layer_count,
                            args.dropout),
          mix_seed(args.seed, 0x30));
      model.input_checksum = p.vocab.checksum();
    }
    embedder = std::make_unique<MlpEmbedder>(model, p.encodings);
    model_file = (dir / "model.bin").string();
  } else if (args.channel == "precomputed") {
    if (!features) {
      throw data_error("--channel precomputed requires --features");
    }
    embedder = std::make_unique<PrecomputedEmbedder>(*features,
                                                     p.matrix.item_ids);
  } else if (args.channel == "combined") {
    if (args.model_a_path.empty() || !features) {
      throw data_error("--channel combined requires --model-a and "
                       "--features");
    }
    EmbeddingModel channel_a = load_model(args.model_a_path);
    if (channel_a.input_checksum != p.vocab.checksum()) {
      std::ostringstream msg;
      msg << "vocabulary mismatch: channel A model was trained against "
          << "checksum " << std::hex << channel_a.input_checksum
          << ", catalog yields " << p.vocab.checksum();
      throw data_error(msg.str());
    }
    combined = make_combined(std::move(channel_a), *features, args.dim,
                             mix_seed(args.seed, 0x31));
    embedder = std::make_unique<CombinedEmbedder>(combined, p.encodings,
                                                  p.matrix.item_ids);
    model_file = (dir / "combined.bin").string();
  } else {
    throw data_error("unknown channel: " + args.channel);
  }

  const TrainResult result = train(*embedder, p.matrix, p.split, config);

  // customer validation: logistic regressions on frozen fDNA
  std::optional<FitResult> fit;
  if (!args.skip_customer_fit && !p.split.customer_val.empty()) {
    const std::size_t d = embedder->dim();
    std::vector<double> rows(p.split.item_train.size() * d);
    par::for_each(p.split.item_train.size(), [&](std::size_t a) {
      embedder->forward_slot(0, p.split.item_train[a], Mode::infer, 0,
                             rows.data() + a * d);
    });
    FitConfig fit_config;
    fit_config.l2_lambda = args.lambda;
    fit_config.max_iterations = args.fit_iterations;
    fit = fit_customers(rows, d, p.split.item_train, p.matrix,
                        p.split.customer_val, fit_config);
  }

  // artifacts
  save_vocabulary(p.vocab, (dir / "vocab.txt").string());
  save_derived_labels(p.catalog, (dir / "derived.txt").string());
  save_split(make_split_manifest(p.matrix, p.split, args.seed,
                                 args.item_val_fraction,
                                 args.customer_val_fraction),
             (dir / "split.txt").string());
  if (args.channel == "attribute") {
    save_model(model, model_file);
  } else if (args.channel == "combined") {
    save_combined(combined, model_file);
  }
  save_bank(result.bank, (dir / "bank_train.bin").string());
  if (fit) save_bank(fit->bank, (dir / "bank_val.bin").string());

  std::ostringstream manifest;
  manifest << "FDNA-RUN v1\n";
  manifest << "channel " << args.channel << "\n";
  manifest << "catalog " << args.catalog_path << "\n";
  manifest << "purchases " << args.purchases_path << "\n";
  manifest << "seed " << args.seed << "\n";
  manifest << "dim " << embedder->dim() << "\n";
  manifest << "layers " << args.layer_count << "\n";
  manifest << "dropout " << fmt_double(args.dropout) << "\n";
  manifest << "learning_rate " << fmt_double(args.learning_rate) << "\n";
  manifest << "momentum " << fmt_double(args.momentum) << "\n";
  manifest << "epochs " << args.epochs << "\n";
  manifest << "batch " << args.batch << "\n";
  manifest << "negative_subsample " << args.neg_subsample << "\n";
  manifest << "item_val_fraction " << fmt_double(args.item_val_fraction)
           << "\n";
  manifest << "customer_val_fraction "
           << fmt_double(args.customer_val_fraction) << "\n";
  manifest << "price_clusters " << args.price_clusters << "\n";
  manifest << "fabric_clusters " << args.fabric_clusters << "\n";
  manifest << "min_class_support " << args.min_class_support << "\n";
  manifest << "lambda " << fmt_double(args.lambda) << "\n";
  manifest << "vocabulary_length " << p.vocab.total_length << "\n";
  {
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(p.vocab.checksum()));
    manifest << "vocab_checksum " << hex << "\n";
  }
  manifest << "items_train " << p.split.item_train.size() << " items_val "
           << p.split.item_val.size() << "\n";
  manifest << "customers_train " << p.split.customer_train.size()
           << " customers_val " << p.split.customer_val.size() << "\n";
  manifest << loss_history_text(result);
  manifest << "clamp_low " << result.clamps.low << " clamp_high "
           << result.clamps.high << "\n";
  manifest << "fdna_zero_fraction " << fmt_double(result.fdna_zero_fraction)
           << "\n";
  if (fit) {
    std::size_t converged = 0;
    long total_iterations = 0;
    for (std::size_t r = 0; r < fit->converged.size(); ++r) {
      converged += fit->converged[r];
      total_iterations += fit->iterations[r];
    }
    manifest << "fit_converged " << converged << "/" << fit->converged.size()
             << " fit_iterations " << total_iterations << "\n";
  }
  write_text_file((dir / "run_manifest.txt").string(), manifest.str());

  std::cerr << "train: " << args.channel << " channel, "
            << result.loss_history.size() - 1 << " epochs in "
            << timer.seconds() << " s, final loss "
            << fmt_double(result.loss_history.back()) << "\n";
  std::cout << "train: wrote artifacts to " << args.out_dir << "\n";
  return 0;
}

// -------------------------------------------------------------------- embed

struct EmbedArgs {
  std::string model_path, vocab_path, catalog_path, features_path, out_path;
  std::string derived_path;
  std::string format = "store";
};

int cmd_embed(const EmbedArgs& args) {
  EmbeddingStore store;

  if (args.model_path.empty()) {
    // passthrough: precomputed features become the store
    if (args.features_path.empty()) {
      throw data_error("embed needs --model or --features");
    }
    const FeatureChannel features = load_features_file(args.features_path);
    for (std::size_t i = 0; i < features.ids.size(); ++i) {
      store.add(features.ids[i],
                {features.data.data() + i * features.width, features.width});
    }
  } else {
    if (args.vocab_path.empty() || args.catalog_path.empty()) {
      throw data_error("embed --model needs --vocab and --catalog");
    }
    const AttributeVocabulary vocab = load_vocabulary(args.vocab_path);
    Catalog catalog = load_catalog_file(args.catalog_path);
    const bool needs_derived =
        vocab.family("price_cluster") || vocab.family("fabric_cluster");
    if (!args.derived_path.empty()) {
      apply_derived_labels(catalog, args.derived_path);
    } else if (needs_derived) {
      throw data_error(
          "this vocabulary includes derived cluster families; pass the "
          "training run's --derived file");
    }

    // sniff the artifact type from its first header line
    std::ifstream head(args.model_path, std::ios::binary);
    std::string first_line;
    std::getline(head, first_line);
    head.close();

    if (first_line == "FDNA-COMBINED v1") {
      const CombinedHeader header = read_combined_header(args.model_path);
      std::optional<FeatureChannel> features;
      if (header.precomputed_channel) {
        if (args.features_path.empty()) {
          throw data_error("this combined model needs --features");
        }
        features = load_features_file(args.features_path);
      }
      const CombinedModel model = load_combined(
          args.model_path, features ? &*features : nullptr);
      if (model.channel_a.input_checksum != vocab.checksum()) {
        std::ostringstream msg;
        msg << "vocabulary mismatch: model expects checksum " << std::hex
            << model.channel_a.input_checksum << ", vocabulary file has "
            << vocab.checksum();
        throw data_error(msg.str());
      }
      for (const auto& item : catalog.items) {
        const SparseVec enc = encode_item(item, vocab);
        ChannelBInput input_b;
        input_b.item_id = &item.id;
        SparseVec enc_b;
        if (!header.precomputed_channel) {
          enc_b = enc;
          input_b = ChannelBInput{};
          input_b.sparse = &enc_b;
        }
        store.add(item.id, forward_combined(model, enc, input_b));
      }
    } else {
      const EmbeddingModel model = load_model(args.model_path);
      if (model.input_checksum != vocab.checksum()) {
        std::ostringstream msg;
        msg << "vocabulary mismatch: model expects checksum " << std::hex
            << model.input_checksum << ", vocabulary file has "
            << vocab.checksum();
        throw data_error(msg.str());
      }
      for (const auto& item : catalog.items) {
        store.add(item.id,
                  forward(model, encode_item(item, vocab), Mode::infer, 0));
      }
    }
  }
  store.finalize();

  if (args.format == "store") {
    save_store(store, args.out_path);
  } else if (args.format == "text") {
    std::ostringstream out;
    for (std::size_t i = 0; i < store.size(); ++i) {
      out << store.ids[i];
      for (double v : store.vec(i)) out << ' ' << fmt_double(v);
      out << '\n';
    }
    write_text_file(args.out_path, out.str());
  } else {
    throw data_error("unknown embed format: " + args.format);
  }
  std::cout << "embed: " << store.size() << " items, dimension " << store.dim
            << " -> " << args.out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvalArgs {
  std::string store_path, purchases_path, split_path;
  std::string bank_train_path, bank_val_path;
  std::string quadrant = "all";
  std::string label = "model";
  std::size_t pair_sample = 0;
  std::uint64_t seed = 1;
  std::string out_path;
  std::string per_customer_out;
  std::string roc_out;
  std::string capture_ks;
};

struct LoadedEval {
  PurchaseMatrix matrix;
  QuadrantSplit split;
  EmbeddingStore store;
  std::optional<CustomerBank> bank_train, bank_val;
  ScoringContext ctx;
};

// fills the destination in place: the scoring context points into the
// LoadedEval members, so the object must already sit at its final address
void load_eval(const std::string& store_path,
               const std::string& purchases_path,
               const std::string& split_path,
               const std::string& bank_train_path,
               const std::string& bank_val_path, LoadedEval* out) {
  LoadedEval& loaded = *out;
  loaded.store = load_store(store_path);
  const SplitManifest manifest = load_split(split_path);

  std::vector<std::string> item_order;
  item_order.reserve(manifest.item_train.size() + manifest.item_val.size());
  // manifest order is the catalog order: train/val lists interleave by id
  // resolution below, so use the union and let resolve_split sort indices
  for (const auto& id : manifest.item_train) item_order.push_back(id);
  for (const auto& id : manifest.item_val) item_order.push_back(id);
  std::sort(item_order.begin(), item_order.end());
  loaded.matrix = load_purchases_file(purchases_path, item_order);
  loaded.split = resolve_split(manifest, loaded.matrix);

  if (!bank_train_path.empty()) {
    loaded.bank_train = align_bank(load_bank(bank_train_path), loaded.matrix,
                                   loaded.split.customer_train);
  }
  if (!bank_val_path.empty()) {
    loaded.bank_val = align_bank(load_bank(bank_val_path), loaded.matrix,
                                 loaded.split.customer_val);
  }
  loaded.ctx = make_scoring_context_from_store(
      loaded.matrix, loaded.split, loaded.store,
      loaded.bank_train ? &*loaded.bank_train : nullptr,
      loaded.bank_val ? &*loaded.bank_val : nullptr);
}

int cmd_evaluate(const EvalArgs& args) {
  LoadedEval loaded;
  load_eval(args.store_path, args.purchases_path, args.split_path,
            args.bank_train_path, args.bank_val_path, &loaded);
  const std::optional<std::size_t> sample =
      args.pair_sample > 0 ? std::optional<std::size_t>(args.pair_sample)
                           : std::nullopt;

  std::vector<Quadrant> quadrants;
  if (args.quadrant == "all") {
    quadrants = {Quadrant::tt, Quadrant::tv, Quadrant::vt, Quadrant::vv};
  } else {
    quadrants = {quadrant_from_name(args.quadrant)};
  }

  std::ostringstream out;
  std::ostringstream roc_text;
  roc_text << "model\tquadrant\tfpr\ttpr\n";
  for (Quadrant q : quadrants) {
    const QuadrantView view = quadrant(loaded.matrix, loaded.split, q);
    std::vector<double> predicted;
    std::vector<std::uint8_t> bought;
    quadrant_scored_pairs(loaded.ctx, q, sample, mix_seed(args.seed, 0xe7a),
                          &predicted, &bought);
    const RocCurve curve = roc_auc(predicted, bought);
    out << "auc " << args.label << " " << quadrant_name(q) << " "
        << fmt_double(curve.auc) << " items " << view.items().size()
        << " customers " << view.customers().size() << " positives "
        << view.count_entries() << "\n";
    if (!args.roc_out.empty()) {
      for (const auto& point : curve.points) {
        roc_text << args.label << '\t' << quadrant_name(q) << '\t'
                 << fmt_double(point.fpr) << '\t' << fmt_double(point.tpr)
                 << '\n';
      }
    }
  }
  if (!args.roc_out.empty()) {
    write_text_file(args.roc_out, roc_text.str());
  }

  if (!args.capture_ks.empty()) {
    std::istringstream ks(args.capture_ks);
    std::string token;
    while (std::getline(ks, token, ',')) {
      const std::size_t k = std::stoull(token);
      const TopKResult capture = top_k_capture(loaded.ctx, true, k);
      out << "capture top-" << k << " " << fmt_double(capture.capture)
          << " hits " << capture.hits << " purchases " << capture.purchases
          << " customers " << capture.customers << "\n";
    }
  }

  if (!args.per_customer_out.empty()) {
    const CustomerAucResult pairs = per_customer_auc_pairs(loaded.ctx, true);
    std::ostringstream pc;
    pc << "customer\tauc_item_train\tauc_item_val\n";
    std::vector<double> xs, ys;
    for (const auto& pair : pairs.pairs) {
      pc << pair.customer_id << '\t' << fmt_double(pair.auc_train_items)
         << '\t' << fmt_double(pair.auc_val_items) << '\n';
      xs.push_back(pair.auc_train_items);
      ys.push_back(pair.auc_val_items);
    }
    write_text_file(args.per_customer_out, pc.str());
    if (xs.size() >= 2) {
      try {
        out << "per_customer r2 " << fmt_double(pearson_r2(xs, ys))
            << " customers " << xs.size() << " skipped " << pairs.skipped
            << "\n";
      } catch (const data_error&) {
        out << "per_customer r2 undefined customers " << xs.size()
            << " skipped " << pairs.skipped << "\n";
      }
    }
  }

  if (args.out_path.empty()) {
    std::cout << out.str();
  } else {
    write_text_file(args.out_path, out.str());
    std::cout << "evaluate: wrote " << args.out_path << "\n";
  }
  return 0;
}

// --------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string store_path, purchases_path, split_path;
  std::string bank_train_path, bank_val_path;
  std::string quadrant = "vv";
  std::size_t bins = 200;
  std::size_t pair_sample = 0;
  std::uint64_t seed = 1;
  std::string out_path;
};

int cmd_calibrate(const CalibrateArgs& args) {
  LoadedEval loaded;
  load_eval(args.store_path, args.purchases_path, args.split_path,
            args.bank_train_path, args.bank_val_path, &loaded);
  std::vector<double> predicted;
  std::vector<std::uint8_t> bought;
  quadrant_scored_pairs(loaded.ctx, quadrant_from_name(args.quadrant),
                        args.pair_sample > 0
                            ? std::optional<std::size_t>(args.pair_sample)
                            : std::nullopt,
                        mix_seed(args.seed, 0xca1), &predicted, &bought);
  const CalibrationReport report = calibrate(predicted, bought, args.bins);

  std::ostringstream out;
  out << "bin\tmean_predicted\tempirical_rate\tcount\n";
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    out << b << '\t' << fmt_double(report.bins[b].mean_predicted) << '\t'
        << fmt_double(report.bins[b].empirical_rate) << '\t'
        << report.bins[b].count << '\n';
  }
  write_text_file(args.out_path, out.str());
  std::cout << "calibrate: " << report.sample_size << " pairs into "
            << report.bins.size() << " bins -> " << args.out_path << "\n";
  return 0;
}

// --------------------------------------------------------------- recommend

struct RecommendArgs {
  std::string store_path, purchases_path, split_path;
  std::string bank_train_path, bank_val_path;
  std::string customer;
  std::size_t top = 20;
  std::string items = "validation";
  std::string out_path;
};

int cmd_recommend(const RecommendArgs& args) {
  LoadedEval loaded;
  load_eval(args.store_path, args.purchases_path, args.split_path,
            args.bank_train_path, args.bank_val_path, &loaded);

  std::int64_t customer = -1;
  for (std::size_t j = 0; j < loaded.matrix.n_customers(); ++j) {
    if (loaded.matrix.customer_ids[j] == args.customer) {
      customer = static_cast<std::int64_t>(j);
      break;
    }
  }
  if (customer < 0) {
    throw data_error("unknown customer: " + args.customer);
  }

  std::vector<std::uint32_t> item_set;
  if (args.items == "validation") {
    item_set = loaded.split.item_val;
  } else if (args.items == "training") {
    item_set = loaded.split.item_train;
  } else if (args.items == "all") {
    item_set.resize(loaded.matrix.n_items());
    for (std::uint32_t i = 0; i < item_set.size(); ++i) item_set[i] = i;
  } else {
    throw data_error("unknown item set: " + args.items);
  }

  std::vector<std::pair<double, std::uint32_t>> scored;
  scored.reserve(item_set.size());
  for (std::uint32_t i : item_set) {
    scored.emplace_back(
        loaded.ctx.score(i, static_cast<std::uint32_t>(customer)), i);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) {
                     if (a.first != b.first) return a.first > b.first;
                     return a.second < b.second;
                   });
  const std::size_t take = std::min(args.top, scored.size());

  std::ostringstream out;
  out << "rank\titem\tprobability\tbought\n";
  for (std::size_t t = 0; t < take; ++t) {
    const auto [p, i] = scored[t];
    out << t + 1 << '\t' << loaded.matrix.item_ids[i] << '\t'
        << fmt_double(p) << '\t'
        << (loaded.matrix.has(i, static_cast<std::size_t>(customer)) ? 1 : 0)
        << '\n';
  }
  if (args.out_path.empty()) {
    std::cout << out.str();
  } else {
    write_text_file(args.out_path, out.str());
    std::cout << "recommend: wrote " << args.out_path << "\n";
  }
  return 0;
}

// --------------------------------------------------------------- neighbors

struct NeighborsArgs {
  std::string store_path, item, out_path;
  std::size_t k = 10;
};

int cmd_neighbors(const NeighborsArgs& args) {
  const EmbeddingStore store = load_store(args.store_path);
  const NeighborResult result = nearest_neighbors(store, args.item, args.k);
  std::ostringstream out;
  out << "query\trank\tneighbor\tdistance\n";
  for (std::size_t t = 0; t < result.neighbors.size(); ++t) {
    out << result.query << '\t' << t + 1 << '\t'
        << result.neighbors[t].id << '\t'
        << fmt_double(result.neighbors[t].distance) << '\n';
  }
  if (args.out_path.empty()) {
    std::cout << out.str();
  } else {
    write_text_file(args.out_path, out.str());
    std::cout << "neighbors: wrote " << args.out_path << "\n";
  }
  return 0;
}

// --------------------------------------------------------------------- map

struct MapArgs {
  std::string store_path, purchases_path, out_path, kl_out_path;
  std::size_t sample = 4096;
  std::size_t min_sales = 10;
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  bool cosine_input = false;
  std::uint64_t seed = 1;
};

int cmd_map(const MapArgs& args) {
  const EmbeddingStore store = load_store(args.store_path);
  // the sales filter only needs an item order; the store ids provide it
  const PurchaseMatrix matrix =
      load_purchases_file(args.purchases_path, store.ids);
  const std::vector<std::string> sampled =
      sample_items(store, args.sample, args.min_sales, matrix,
                   mix_seed(args.seed, 0x3a9));

  std::vector<std::vector<double>> points;
  points.reserve(sampled.size());
  for (const auto& id : sampled) {
    const auto vec = store.vec(store.index.at(id));
    points.emplace_back(vec.begin(), vec.end());
  }

  TsneConfig config;
  config.perplexity = args.perplexity;
  config.iterations = args.iterations;
  config.learning_rate = args.learning_rate;
  config.early_exaggeration_iters = std::min(250, args.iterations / 4);
  config.momentum_switch_iter = std::min(250, args.iterations / 4);
  config.cosine_input = args.cosine_input;
  config.seed = mix_seed(args.seed, 0x3aa);

  Timer timer;
  const MapResult result = tsne(points, config);
  std::cerr << "map: " << sampled.size() << " items, " << args.iterations
            << " iterations in " << timer.seconds() << " s, final KL "
            << fmt_double(result.kl_history.back()) << "\n";

  std::ostringstream out;
  out << "item\tx\ty\n";
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    out << sampled[i] << '\t' << fmt_double(result.coordinates[i][0]) << '\t'
        << fmt_double(result.coordinates[i][1]) << '\n';
  }
  write_text_file(args.out_path, out.str());
  if (!args.kl_out_path.empty()) {
    std::ostringstream kl;
    kl << "iteration\tkl\n";
    for (std::size_t t = 0; t < result.kl_history.size(); ++t) {
      kl << t + 1 << '\t' << fmt_double(result.kl_history[t]) << '\n';
    }
    write_text_file(args.kl_out_path, kl.str());
  }
  std::cout << "map: wrote " << args.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fashion-style purchase modeling: content-conditioned "
               "logistic factorization pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads (0 = default)");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand(
      "gen-data", "generate a synthetic catalog, purchase log, and feature "
                  "file from a planted world");
  gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--items", gen.items, "catalog size");
  gen_cmd->add_option("--customers", gen.customers, "customer count");
  gen_cmd->add_option("--rank", gen.rank, "planted latent rank");
  gen_cmd->add_option("--density", gen.density, "target purchase density");
  gen_cmd->add_option("--noise", gen.noise, "probability mixing toward the "
                                            "density (0..1)");
  gen_cmd->add_option("--tau-a", gen.tau_a, "attribute tag sharpness");
  gen_cmd->add_option("--tau-b", gen.tau_b, "feature channel sharpness");
  gen_cmd->add_option("--feature-width", gen.feature_width,
                      "dense feature width");
  gen_cmd->add_option("--seed", gen.seed, "world seed");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand(
      "train", "train a purchase model on a catalog and purchase log");
  train_cmd->add_option("--catalog", tr.catalog_path, "catalog jsonl")
      ->required();
  train_cmd->add_option("--purchases", tr.purchases_path, "purchase csv")
      ->required();
  train_cmd->add_option("--out", tr.out_dir, "output directory")->required();
  train_cmd->add_option("--channel", tr.channel,
                        "attribute | precomputed | combined");
  train_cmd->add_option("--features", tr.features_path,
                        "precomputed feature file");
  train_cmd->add_option("--model-a", tr.model_a_path,
                        "frozen channel A model (combined)");
  train_cmd->add_option("--resume", tr.resume_path,
                        "continue training this model artifact");
  train_cmd->add_option("--dim", tr.dim, "fDNA dimension");
  train_cmd->add_option("--layers", tr.layer_count, "MLP layer count");
  train_cmd->add_option("--dropout", tr.dropout, "hidden dropout rate");
  train_cmd->add_option("--lr", tr.learning_rate, "learning rate");
  train_cmd->add_option("--momentum", tr.momentum, "momentum");
  train_cmd->add_option("--epochs", tr.epochs, "epochs");
  train_cmd->add_option("--batch", tr.batch, "item batch size");
  train_cmd->add_option("--neg-subsample", tr.neg_subsample,
                        "negatives sampled per item (0 = exact)");
  train_cmd->add_option("--item-val-fraction", tr.item_val_fraction,
                        "item validation fraction");
  train_cmd->add_option("--customer-val-fraction", tr.customer_val_fraction,
                        "customer validation fraction");
  train_cmd->add_option("--price-clusters", tr.price_clusters,
                        "price k-means clusters (0 = off)");
  train_cmd->add_option("--fabric-clusters", tr.fabric_clusters,
                        "fabric k-means clusters (0 = off)");
  train_cmd->add_option("--min-class-support", tr.min_class_support,
                        "minimum items per retained tag class");
  train_cmd->add_option("--lambda", tr.lambda,
                        "L2 strength for customer validation fits");
  train_cmd->add_option("--fit-iterations", tr.fit_iterations,
                        "max iterations per customer fit");
  train_cmd->add_flag("--skip-customer-fit", tr.skip_customer_fit,
                      "skip the validation-customer regressions");
  train_cmd->add_option("--seed", tr.seed, "run seed");

  EmbedArgs em;
  auto* embed_cmd = app.add_subcommand(
      "embed", "compute fDNA vectors for a catalog into an embedding store");
  embed_cmd->add_option("--model", em.model_path, "model artifact");
  embed_cmd->add_option("--vocab", em.vocab_path, "vocabulary artifact");
  embed_cmd->add_option("--catalog", em.catalog_path, "catalog jsonl");
  embed_cmd->add_option("--features", em.features_path, "feature file");
  embed_cmd->add_option("--out", em.out_path, "output store")->required();
  embed_cmd->add_option("--format", em.format, "store | text");
  embed_cmd->add_option("--derived", em.derived_path,
                        "derived cluster labels from the training run");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "quadrant AUC table and ranking metrics");
  eval_cmd->add_option("--store", ev.store_path, "embedding store")
      ->required();
  eval_cmd->add_option("--purchases", ev.purchases_path, "purchase csv")
      ->required();
  eval_cmd->add_option("--split", ev.split_path, "split manifest")
      ->required();
  eval_cmd->add_option("--bank-train", ev.bank_train_path,
                       "training customer bank");
  eval_cmd->add_option("--bank-val", ev.bank_val_path,
                       "validation customer bank");
  eval_cmd->add_option("--quadrant", ev.quadrant, "tt | tv | vt | vv | all");
  eval_cmd->add_option("--label", ev.label,
                       "model name echoed in the report rows");
  eval_cmd->add_option("--pair-sample", ev.pair_sample,
                       "sample this many pairs (0 = exact)");
  eval_cmd->add_option("--seed", ev.seed, "sampling seed");
  eval_cmd->add_option("--out", ev.out_path, "report file (default stdout)");
  eval_cmd->add_option("--per-customer-out", ev.per_customer_out,
                       "write per-customer AUC pairs here");
  eval_cmd->add_option("--roc-out", ev.roc_out,
                       "write ROC curve points here");
  eval_cmd->add_option("--capture-k", ev.capture_ks,
                       "comma-separated top-k capture levels");

  CalibrateArgs ca;
  auto* cal_cmd = app.add_subcommand(
      "calibrate", "reliability report: predicted probability vs empirical "
                   "rate");
  cal_cmd->add_option("--store", ca.store_path, "embedding store")
      ->required();
  cal_cmd->add_option("--purchases", ca.purchases_path, "purchase csv")
      ->required();
  cal_cmd->add_option("--split", ca.split_path, "split manifest")
      ->required();
  cal_cmd->add_option("--bank-train", ca.bank_train_path,
                      "training customer bank");
  cal_cmd->add_option("--bank-val", ca.bank_val_path,
                      "validation customer bank");
  cal_cmd->add_option("--quadrant", ca.quadrant, "tt | tv | vt | vv");
  cal_cmd->add_option("--bins", ca.bins, "equal-count bin count");
  cal_cmd->add_option("--pair-sample", ca.pair_sample,
                      "sample this many pairs (0 = exact)");
  cal_cmd->add_option("--seed", ca.seed, "sampling seed");
  cal_cmd->add_option("--out", ca.out_path, "report file")->required();

  RecommendArgs re;
  auto* rec_cmd = app.add_subcommand(
      "recommend", "ranked item recommendations for one customer");
  rec_cmd->add_option("--store", re.store_path, "embedding store")
      ->required();
  rec_cmd->add_option("--purchases", re.purchases_path, "purchase csv")
      ->required();
  rec_cmd->add_option("--split", re.split_path, "split manifest")
      ->required();
  rec_cmd->add_option("--bank-train", re.bank_train_path,
                      "training customer bank");
  rec_cmd->add_option("--bank-val", re.bank_val_path,
                      "validation customer bank");
  rec_cmd->add_option("--customer", re.customer, "customer id")->required();
  rec_cmd->add_option("--top", re.top, "list length");
  rec_cmd->add_option("--items", re.items, "validation | training | all");
  rec_cmd->add_option("--out", re.out_path, "output file (default stdout)");

  NeighborsArgs ne;
  auto* nn_cmd = app.add_subcommand(
      "neighbors", "nearest neighbors of an item in fDNA space");
  nn_cmd->add_option("--store", ne.store_path, "embedding store")
      ->required();
  nn_cmd->add_option("--item", ne.item, "query item id")->required();
  nn_cmd->add_option("--k", ne.k, "neighbor count");
  nn_cmd->add_option("--out", ne.out_path, "output file (default stdout)");

  MapArgs mp;
  auto* map_cmd = app.add_subcommand(
      "map", "2-D t-SNE map of sampled item embeddings");
  map_cmd->add_option("--store", mp.store_path, "embedding store")
      ->required();
  map_cmd->add_option("--purchases", mp.purchases_path, "purchase csv")
      ->required();
  map_cmd->add_option("--sample", mp.sample, "items to map");
  map_cmd->add_option("--min-sales", mp.min_sales,
                      "minimum purchases for eligibility");
  map_cmd->add_option("--perplexity", mp.perplexity, "t-SNE perplexity");
  map_cmd->add_option("--iterations", mp.iterations, "gradient iterations");
  map_cmd->add_option("--lr", mp.learning_rate, "t-SNE learning rate");
  map_cmd->add_flag("--cosine-input", mp.cosine_input,
                    "use cosine input distances instead of Euclidean");
  map_cmd->add_option("--seed", mp.seed, "sampling and layout seed");
  map_cmd->add_option("--out", mp.out_path, "coordinate file")->required();
  map_cmd->add_option("--kl-out", mp.kl_out_path, "KL history file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  par::set_threads(threads);

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (embed_cmd->parsed()) return cmd_embed(em);
    if (eval_cmd->parsed()) return cmd_evaluate(ev);
    if (cal_cmd->parsed()) return cmd_calibrate(ca);
    if (rec_cmd->parsed()) return cmd_recommend(re);
    if (nn_cmd->parsed()) return cmd_neighbors(ne);
    if (map_cmd->parsed()) return cmd_map(mp);
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
