#include "fdna/artifacts.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "fdna/binio.hpp"
#include "fdna/errors.hpp"

namespace fdna {

namespace {

constexpr const char* kEndMarker = "END\n";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write file: " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw data_error("short write: " + path);
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s, const std::string& origin) {
  char* end = nullptr;
  const std::uint64_t v = std::strtoull(s.c_str(), &end, 16);
  if (end == s.c_str() || *end != '\0') {
    throw data_error(origin + ": bad checksum field '" + s + "'");
  }
  return v;
}

// splits "header...\nEND\npayload" and verifies the payload checksum named
// in the header line "payload_checksum <hex>"
struct ParsedBlob {
  std::vector<std::string> header;
  std::string payload;
};

ParsedBlob split_blob(const std::string& blob, const std::string& origin) {
  const std::string marker = std::string("\n") + kEndMarker;
  const auto at = blob.find(marker);
  if (at == std::string::npos) {
    throw data_error(origin + ": missing END marker");
  }
  ParsedBlob parsed;
  parsed.payload = blob.substr(at + marker.size());
  std::istringstream head(blob.substr(0, at + 1));
  std::string line;
  while (std::getline(head, line)) parsed.header.push_back(line);
  return parsed;
}

std::string header_field(const std::vector<std::string>& header,
                         const std::string& key, const std::string& origin) {
  for (const auto& line : header) {
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  }
  throw data_error(origin + ": missing header field '" + key + "'");
}

void check_payload(const ParsedBlob& parsed, const std::string& origin) {
  const std::uint64_t stored = parse_hex64(
      header_field(parsed.header, "payload_checksum", origin), origin);
  const std::uint64_t actual =
      fnv1a64(parsed.payload.data(), parsed.payload.size());
  if (stored != actual) {
    throw data_error(origin + ": payload checksum mismatch (header " +
                     hex64(stored) + ", payload " + hex64(actual) + ")");
  }
}

const char* activation_name(Activation a) {
  return a == Activation::relu ? "relu" : "identity";
}

Activation activation_from(const std::string& name,
                           const std::string& origin) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw data_error(origin + ": unknown activation '" + name + "'");
}

}  // namespace

std::string model_to_string(const EmbeddingModel& model) {
  BinWriter payload;
  for (const auto& layer : model.layers) {
    payload.bytes(layer.weights.data(),
                  layer.weights.size() * sizeof(double));
    payload.bytes(layer.bias.data(), layer.bias.size() * sizeof(double));
  }

  std::ostringstream head;
  head << "FDNA-MODEL v1\n";
  head << "seed " << model.init_seed << "\n";
  head << "input_checksum " << hex64(model.input_checksum) << "\n";
  head << "layers " << model.layers.size() << "\n";
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& spec = model.layers[l].spec;
    head << "layer " << l << " in " << spec.in_width << " out "
         << spec.out_width << " activation "
         << activation_name(spec.activation) << " dropout "
         << fmt_double(spec.dropout_rate) << "\n";
  }
  head << "payload_checksum "
       << hex64(fnv1a64(payload.buffer.data(), payload.buffer.size()))
       << "\n";
  head << kEndMarker;
  return head.str() + payload.buffer;
}

EmbeddingModel model_from_string(const std::string& blob,
                                 const std::string& origin) {
  ParsedBlob parsed = split_blob(blob, origin);
  if (parsed.header.empty() || parsed.header[0] != "FDNA-MODEL v1") {
    throw data_error(origin + ": not a model artifact");
  }
  check_payload(parsed, origin);

  EmbeddingModel model;
  model.init_seed = std::stoull(header_field(parsed.header, "seed", origin));
  model.input_checksum = parse_hex64(
      header_field(parsed.header, "input_checksum", origin), origin);
  const std::size_t layer_count =
      std::stoull(header_field(parsed.header, "layers", origin));

  std::vector<LayerSpec> specs(layer_count);
  for (const auto& line : parsed.header) {
    if (line.rfind("layer ", 0) != 0) continue;
    std::istringstream row(line);
    std::string word, act;
    std::size_t idx = 0;
    LayerSpec spec;
    row >> word >> idx;
    row >> word >> spec.in_width;   // in
    row >> word >> spec.out_width;  // out
    row >> word >> act;             // activation
    std::string drop;
    row >> word >> drop;  // dropout
    if (!row || idx >= layer_count) {
      throw data_error(origin + ": bad layer line '" + line + "'");
    }
    spec.activation = activation_from(act, origin);
    spec.dropout_rate = std::strtod(drop.c_str(), nullptr);
    specs[idx] = spec;
  }

  std::size_t offset = 0;
  auto take = [&](std::size_t count, std::vector<double>& out) {
    const std::size_t bytes = count * sizeof(double);
    if (offset + bytes > parsed.payload.size()) {
      throw data_error(origin + ": payload too short");
    }
    out.resize(count);
    std::memcpy(out.data(), parsed.payload.data() + offset, bytes);
    offset += bytes;
  };
  for (const auto& spec : specs) {
    Layer layer;
    layer.spec = spec;
    take(spec.out_width * spec.in_width, layer.weights);
    take(spec.out_width, layer.bias);
    model.layers.push_back(std::move(layer));
  }
  if (offset != parsed.payload.size()) {
    throw data_error(origin + ": trailing bytes in payload");
  }
  return model;
}

void save_model(const EmbeddingModel& model, const std::string& path) {
  write_file(path, model_to_string(model));
}

EmbeddingModel load_model(const std::string& path) {
  return model_from_string(read_file(path), path);
}

namespace {

std::string combined_to_string(const CombinedModel& model) {
  BinWriter payload;
  payload.f64s(model.merge.weights);
  payload.f64s(model.merge.bias);
  payload.str(model_to_string(model.channel_a));
  const auto* model_b = std::get_if<EmbeddingModel>(&model.channel_b);
  if (model_b) payload.str(model_to_string(*model_b));

  std::ostringstream head;
  head << "FDNA-COMBINED v1\n";
  head << "seed " << model.init_seed << "\n";
  head << "merge_in " << model.merge.spec.in_width << "\n";
  head << "merge_out " << model.merge.spec.out_width << "\n";
  if (model_b) {
    head << "channel_b embedded\n";
  } else {
    const auto& features = std::get<FeatureChannel>(model.channel_b);
    head << "channel_b precomputed\n";
    head << "features_width " << features.width << "\n";
    head << "features_checksum " << hex64(features.checksum()) << "\n";
  }
  head << "payload_checksum "
       << hex64(fnv1a64(payload.buffer.data(), payload.buffer.size()))
       << "\n";
  head << kEndMarker;
  return head.str() + payload.buffer;
}

}  // namespace

CombinedHeader read_combined_header(const std::string& path) {
  ParsedBlob parsed = split_blob(read_file(path), path);
  if (parsed.header.empty() || parsed.header[0] != "FDNA-COMBINED v1") {
    throw data_error(path + ": not a combined-model artifact");
  }
  CombinedHeader header;
  header.precomputed_channel =
      header_field(parsed.header, "channel_b", path) == "precomputed";
  if (header.precomputed_channel) {
    header.features_width =
        std::stoull(header_field(parsed.header, "features_width", path));
    header.features_checksum = parse_hex64(
        header_field(parsed.header, "features_checksum", path), path);
  }
  return header;
}

void save_combined(const CombinedModel& model, const std::string& path) {
  write_file(path, combined_to_string(model));
}

CombinedModel load_combined(const std::string& path,
                            const FeatureChannel* features) {
  const std::string blob = read_file(path);
  ParsedBlob parsed = split_blob(blob, path);
  if (parsed.header.empty() || parsed.header[0] != "FDNA-COMBINED v1") {
    throw data_error(path + ": not a combined-model artifact");
  }
  check_payload(parsed, path);

  CombinedModel model;
  model.init_seed =
      std::stoull(header_field(parsed.header, "seed", path));
  const std::size_t merge_in =
      std::stoull(header_field(parsed.header, "merge_in", path));
  const std::size_t merge_out =
      std::stoull(header_field(parsed.header, "merge_out", path));
  const bool precomputed =
      header_field(parsed.header, "channel_b", path) == "precomputed";

  std::size_t pos = 0;
  auto need = [&](std::size_t bytes) {
    if (pos + bytes > parsed.payload.size()) {
      throw data_error(path + ": payload too short");
    }
  };
  auto take_u64 = [&]() {
    need(sizeof(std::uint64_t));
    std::uint64_t v;
    std::memcpy(&v, parsed.payload.data() + pos, sizeof(v));
    pos += sizeof(v);
    return v;
  };
  auto take_f64s = [&]() {
    const std::uint64_t count = take_u64();
    need(count * sizeof(double));
    std::vector<double> v(count);
    std::memcpy(v.data(), parsed.payload.data() + pos,
                count * sizeof(double));
    pos += count * sizeof(double);
    return v;
  };
  auto take_str = [&]() {
    const std::uint64_t count = take_u64();
    need(count);
    std::string s = parsed.payload.substr(pos, count);
    pos += count;
    return s;
  };

  model.merge.spec.in_width = merge_in;
  model.merge.spec.out_width = merge_out;
  model.merge.spec.activation = Activation::relu;
  model.merge.spec.dropout_rate = 0.0;
  model.merge.weights = take_f64s();
  model.merge.bias = take_f64s();
  model.channel_a = model_from_string(take_str(), path + " (channel A)");

  if (precomputed) {
    if (!features) {
      throw data_error(path + ": precomputed channel requires a feature "
                             "file");
    }
    const std::uint64_t expected = parse_hex64(
        header_field(parsed.header, "features_checksum", path), path);
    if (features->checksum() != expected) {
      throw data_error(path + ": feature checksum mismatch (model " +
                       hex64(expected) + ", features " +
                       hex64(features->checksum()) + ")");
    }
    model.channel_b = *features;
  } else {
    model.channel_b = model_from_string(take_str(), path + " (channel B)");
  }
  return model;
}

void save_bank(const CustomerBank& bank, const std::string& path) {
  BinWriter payload;
  payload.f64s(bank.weights);
  payload.f64s(bank.biases);
  payload.u64(bank.customer_ids.size());
  for (const auto& id : bank.customer_ids) payload.str(id);

  std::ostringstream head;
  head << "FDNA-BANK v1\n";
  head << "customers " << bank.size() << "\n";
  head << "dim " << bank.dim << "\n";
  head << "payload_checksum "
       << hex64(fnv1a64(payload.buffer.data(), payload.buffer.size()))
       << "\n";
  head << kEndMarker;
  write_file(path, head.str() + payload.buffer);
}

CustomerBank load_bank(const std::string& path) {
  ParsedBlob parsed = split_blob(read_file(path), path);
  if (parsed.header.empty() || parsed.header[0] != "FDNA-BANK v1") {
    throw data_error(path + ": not a customer bank artifact");
  }
  check_payload(parsed, path);
  CustomerBank bank;
  const std::size_t count =
      std::stoull(header_field(parsed.header, "customers", path));
  bank.dim = std::stoull(header_field(parsed.header, "dim", path));

  std::size_t pos = 0;
  auto need = [&](std::size_t bytes) {
    if (pos + bytes > parsed.payload.size()) {
      throw data_error(path + ": payload too short");
    }
  };
  auto take_u64 = [&]() {
    need(sizeof(std::uint64_t));
    std::uint64_t v;
    std::memcpy(&v, parsed.payload.data() + pos, sizeof(v));
    pos += sizeof(v);
    return v;
  };
  auto take_f64s = [&]() {
    const std::uint64_t n = take_u64();
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), parsed.payload.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    return v;
  };
  bank.weights = take_f64s();
  bank.biases = take_f64s();
  const std::uint64_t ids = take_u64();
  for (std::uint64_t i = 0; i < ids; ++i) {
    const std::uint64_t len = take_u64();
    need(len);
    bank.customer_ids.emplace_back(parsed.payload.data() + pos, len);
    pos += len;
  }
  if (bank.size() != count || bank.weights.size() != count * bank.dim) {
    throw data_error(path + ": bank shape does not match header");
  }
  return bank;
}

void save_store(const EmbeddingStore& store, const std::string& path) {
  BinWriter w;
  w.bytes("FDNAVEC1", 8);
  w.u64(store.size());
  w.u64(store.dim);
  w.bytes(store.vectors.data(), store.vectors.size() * sizeof(double));
  for (const auto& id : store.ids) {
    if (id.size() > 63) {
      throw data_error("save_store: id too long (max 63 bytes): " + id);
    }
    char slot[64] = {0};
    std::memcpy(slot, id.data(), id.size());
    w.bytes(slot, sizeof(slot));
  }
  w.write_file(path);
}

EmbeddingStore load_store(const std::string& path) {
  BinReader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, "FDNAVEC1", 8) != 0) {
    throw data_error(path + ": not an embedding store");
  }
  EmbeddingStore store;
  const std::uint64_t count = r.u64();
  store.dim = r.u64();
  store.vectors.resize(count * store.dim);
  r.bytes(store.vectors.data(), store.vectors.size() * sizeof(double));
  store.ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    char slot[64];
    r.bytes(slot, sizeof(slot));
    slot[63] = '\0';
    store.ids.emplace_back(slot);
    store.index[store.ids.back()] = i;
  }
  store.finalize();
  return store;
}

namespace {

std::string escape_label(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\t') {
      out += "\\t";
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

std::string unescape_label(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      if (s[i] == 't') {
        out += '\t';
      } else if (s[i] == 'n') {
        out += '\n';
      } else {
        out += s[i];
      }
    } else {
      out += s[i];
    }
  }
  return out;
}

}  // namespace

void save_vocabulary(const AttributeVocabulary& vocab,
                     const std::string& path) {
  std::ostringstream out;
  out << "FDNA-VOCAB v1\n";
  out << "checksum " << hex64(vocab.checksum()) << "\n";
  out << "families " << vocab.families.size() << " total "
      << vocab.total_length << " min_support " << vocab.min_class_support
      << "\n";
  for (const auto& f : vocab.families) {
    for (std::size_t c = 0; c < f.class_labels.size(); ++c) {
      out << f.name << '\t' << escape_label(f.class_labels[c]) << '\t' << c
          << '\t' << f.offset << '\n';
    }
  }
  write_file(path, out.str());
}

AttributeVocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open vocabulary: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "FDNA-VOCAB v1") {
    throw data_error(path + ": not a vocabulary artifact");
  }
  if (!std::getline(in, line) || line.rfind("checksum ", 0) != 0) {
    throw data_error(path + ": missing checksum line");
  }
  const std::uint64_t stored = parse_hex64(line.substr(9), path);
  AttributeVocabulary vocab;
  if (!std::getline(in, line)) throw data_error(path + ": truncated");
  {
    std::istringstream head(line);
    std::string word;
    std::size_t families = 0;
    head >> word >> families >> word >> vocab.total_length >> word >>
        vocab.min_class_support;
    if (!head) throw data_error(path + ": bad summary line");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t t = 0; t <= line.size(); ++t) {
      if (t == line.size() || line[t] == '\t') {
        cols.push_back(line.substr(start, t - start));
        start = t + 1;
      }
    }
    if (cols.size() != 4) {
      throw data_error(path + ": bad class line '" + line + "'");
    }
    const std::string family = cols[0];
    const std::string label = unescape_label(cols[1]);
    const std::size_t cls = std::stoull(cols[2]);
    const std::size_t offset = std::stoull(cols[3]);
    if (vocab.families.empty() || vocab.families.back().name != family) {
      TagFamily f;
      f.name = family;
      f.offset = offset;
      vocab.families.push_back(std::move(f));
    }
    TagFamily& f = vocab.families.back();
    if (cls != f.class_labels.size() || offset != f.offset) {
      throw data_error(path + ": inconsistent class ordering");
    }
    f.class_labels.push_back(label);
    f.class_index[label] = static_cast<int>(cls);
    f.class_count = f.class_labels.size();
  }
  if (vocab.checksum() != stored) {
    throw data_error(path + ": vocabulary checksum mismatch (header " +
                     hex64(stored) + ", content " + hex64(vocab.checksum()) +
                     ")");
  }
  return vocab;
}

void save_derived_labels(const Catalog& catalog, const std::string& path) {
  std::ostringstream body;
  for (const auto& item : catalog.items) {
    body << item.id << '\t'
         << (item.price_cluster ? *item.price_cluster : -1) << '\t'
         << (item.fabric_cluster ? *item.fabric_cluster : -1) << '\n';
  }
  std::ostringstream out;
  out << "FDNA-DERIVED v1\n";
  out << "checksum "
      << hex64(fnv1a64(body.str().data(), body.str().size())) << "\n";
  out << body.str();
  write_file(path, out.str());
}

void apply_derived_labels(Catalog& catalog, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open derived labels: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "FDNA-DERIVED v1") {
    throw data_error(path + ": not a derived-labels artifact");
  }
  if (!std::getline(in, line) || line.rfind("checksum ", 0) != 0) {
    throw data_error(path + ": missing checksum line");
  }
  const std::uint64_t stored = parse_hex64(line.substr(9), path);

  std::string body;
  std::unordered_map<std::string, std::pair<int, int>> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    body += line;
    body += '\n';
    const auto tab1 = line.find('\t');
    const auto tab2 = line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos) {
      throw data_error(path + ": bad line '" + line + "'");
    }
    const std::string id = line.substr(0, tab1);
    const int price = std::stoi(line.substr(tab1 + 1, tab2 - tab1 - 1));
    const int fabric = std::stoi(line.substr(tab2 + 1));
    labels[id] = {price, fabric};
  }
  if (fnv1a64(body.data(), body.size()) != stored) {
    throw data_error(path + ": derived-labels checksum mismatch");
  }
  for (auto& item : catalog.items) {
    const auto it = labels.find(item.id);
    if (it == labels.end()) {
      throw data_error(path + ": no derived labels for item " + item.id);
    }
    if (it->second.first >= 0) item.price_cluster = it->second.first;
    if (it->second.second >= 0) item.fabric_cluster = it->second.second;
  }
}

SplitManifest make_split_manifest(const PurchaseMatrix& matrix,
                                  const QuadrantSplit& split,
                                  std::uint64_t seed, double item_fraction,
                                  double customer_fraction) {
  SplitManifest manifest;
  manifest.seed = seed;
  manifest.item_fraction = item_fraction;
  manifest.customer_fraction = customer_fraction;
  for (std::uint32_t i : split.item_train) {
    manifest.item_train.push_back(matrix.item_ids[i]);
  }
  for (std::uint32_t i : split.item_val) {
    manifest.item_val.push_back(matrix.item_ids[i]);
  }
  for (std::uint32_t j : split.customer_train) {
    manifest.customer_train.push_back(matrix.customer_ids[j]);
  }
  for (std::uint32_t j : split.customer_val) {
    manifest.customer_val.push_back(matrix.customer_ids[j]);
  }
  return manifest;
}

void save_split(const SplitManifest& manifest, const std::string& path) {
  std::ostringstream out;
  out << "FDNA-SPLIT v1\n";
  out << "seed " << manifest.seed << "\n";
  out << "item_fraction " << fmt_double(manifest.item_fraction) << "\n";
  out << "customer_fraction " << fmt_double(manifest.customer_fraction)
      << "\n";
  out << "counts " << manifest.item_train.size() << " "
      << manifest.item_val.size() << " " << manifest.customer_train.size()
      << " " << manifest.customer_val.size() << "\n";
  for (const auto& id : manifest.item_train) out << "item_train " << id
                                                 << "\n";
  for (const auto& id : manifest.item_val) out << "item_val " << id << "\n";
  for (const auto& id : manifest.customer_train) {
    out << "customer_train " << id << "\n";
  }
  for (const auto& id : manifest.customer_val) {
    out << "customer_val " << id << "\n";
  }
  write_file(path, out.str());
}

SplitManifest load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open split manifest: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "FDNA-SPLIT v1") {
    throw data_error(path + ": not a split manifest");
  }
  SplitManifest manifest;
  std::size_t n_it = 0, n_iv = 0, n_ct = 0, n_cv = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos) {
      throw data_error(path + ": bad line '" + line + "'");
    }
    const std::string key = line.substr(0, space);
    const std::string value = line.substr(space + 1);
    if (key == "seed") {
      manifest.seed = std::stoull(value);
    } else if (key == "item_fraction") {
      manifest.item_fraction = std::strtod(value.c_str(), nullptr);
    } else if (key == "customer_fraction") {
      manifest.customer_fraction = std::strtod(value.c_str(), nullptr);
    } else if (key == "counts") {
      std::istringstream row(value);
      row >> n_it >> n_iv >> n_ct >> n_cv;
    } else if (key == "item_train") {
      manifest.item_train.push_back(value);
    } else if (key == "item_val") {
      manifest.item_val.push_back(value);
    } else if (key == "customer_train") {
      manifest.customer_train.push_back(value);
    } else if (key == "customer_val") {
      manifest.customer_val.push_back(value);
    } else {
      throw data_error(path + ": unknown key '" + key + "'");
    }
  }
  if (manifest.item_train.size() != n_it ||
      manifest.item_val.size() != n_iv ||
      manifest.customer_train.size() != n_ct ||
      manifest.customer_val.size() != n_cv) {
    throw data_error(path + ": id list counts do not match header");
  }
  return manifest;
}

QuadrantSplit resolve_split(const SplitManifest& manifest,
                            const PurchaseMatrix& matrix) {
  std::unordered_map<std::string, std::uint32_t> item_index, customer_index;
  for (std::size_t i = 0; i < matrix.n_items(); ++i) {
    item_index[matrix.item_ids[i]] = static_cast<std::uint32_t>(i);
  }
  for (std::size_t j = 0; j < matrix.n_customers(); ++j) {
    customer_index[matrix.customer_ids[j]] = static_cast<std::uint32_t>(j);
  }
  auto resolve = [&](const std::vector<std::string>& ids,
                     std::unordered_map<std::string, std::uint32_t>& index,
                     const char* what) {
    std::vector<std::uint32_t> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
      const auto it = index.find(id);
      if (it == index.end()) {
        throw data_error(std::string("resolve_split: unknown ") + what +
                         " id '" + id + "'");
      }
      out.push_back(it->second);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  QuadrantSplit split;
  split.item_train = resolve(manifest.item_train, item_index, "item");
  split.item_val = resolve(manifest.item_val, item_index, "item");
  split.customer_train =
      resolve(manifest.customer_train, customer_index, "customer");
  split.customer_val =
      resolve(manifest.customer_val, customer_index, "customer");
  if (split.item_train.size() + split.item_val.size() != matrix.n_items() ||
      split.customer_train.size() + split.customer_val.size() !=
          matrix.n_customers()) {
    throw data_error("resolve_split: manifest does not partition the "
                     "matrix");
  }
  split.rebuild_masks(matrix.n_items(), matrix.n_customers());
  return split;
}

}  // namespace fdna
