#include "fav/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "fav/error.hpp"
#include "fav/text.hpp"

namespace fav {

namespace {

constexpr std::array<std::string_view, 4> kVariantNames{"baseline", "sppp", "lla", "sppp+lla"};

template <class E, std::size_t K>
E parse_enum(std::string_view s, const std::array<std::string_view, K>& names, std::string_view what) {
  for (std::size_t i = 0; i < K; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  std::string msg = std::string(what) + ": unknown value '" + std::string(s) + "' (expected";
  for (auto n : names) msg += " " + std::string(n);
  throw ConfigError(msg + ")");
}

constexpr std::array<std::string_view, 2> kDistanceNames{"normalized", "compactness"};
constexpr std::array<std::string_view, 2> kAssignmentNames{"majority", "threshold"};
constexpr std::array<std::string_view, 2> kPoolingNames{"mean", "overlap_weighted"};
constexpr std::array<std::string_view, 2> kLatentNames{"token_mixing", "free_latents"};

}  // namespace

std::string_view to_string(Variant v) noexcept { return kVariantNames[static_cast<std::size_t>(v)]; }

Variant parse_variant(std::string_view name) {
  if (name == "sppp-only") return Variant::sppp;
  if (name == "lla-only") return Variant::lla;
  return parse_enum<Variant>(name, kVariantNames, "variant");
}

bool uses_sppp(Variant v) noexcept { return v == Variant::sppp || v == Variant::sppp_lla; }
bool uses_lla(Variant v) noexcept { return v == Variant::lla || v == Variant::sppp_lla; }

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.dim = 64;
  c.layers = 2;
  c.heads = 4;
  c.ffn = 64;
  return c;
}

std::size_t ModelConfig::patches() const noexcept {
  if (patch == 0) return 0;
  return (image_height / patch) * (image_width / patch);
}

std::size_t ModelConfig::max_sequence() const noexcept { return patches() + (class_token ? 1 : 0); }

void ModelConfig::validate() const {
  patchify(image_height, image_width, patch);
  if (dim == 0 || layers == 0 || ffn == 0) throw ConfigError("dim, layers and ffn must be positive");
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("heads=" + std::to_string(heads) + " must divide dim=" + std::to_string(dim));
  }
  if (classes < 2) throw ConfigError("need at least 2 classes, got " + std::to_string(classes));
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps must be positive");
  if (uses_sppp(variant)) {
    sppp.validate();
    if (pe_hidden == 0) throw ConfigError("pe_hidden must be positive");
  }
  if (uses_lla(variant)) {
    if (latents >= max_sequence()) {
      throw ConfigError("variant " + std::string(to_string(variant)) + " needs L < N" + (class_token ? "+1" : "") +
                        ": L=" + std::to_string(latents) + ", N=" + std::to_string(patches()));
    }
    LlaConfig{dim, heads, latents, max_sequence()}.validate();
  }
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "image_height=" << image_height << '\n'
     << "image_width=" << image_width << '\n'
     << "patch=" << patch << '\n'
     << "dim=" << dim << '\n'
     << "layers=" << layers << '\n'
     << "heads=" << heads << '\n'
     << "ffn=" << ffn << '\n'
     << "num_classes=" << classes << '\n'
     << "latents=" << latents << '\n'
     << "pe_hidden=" << pe_hidden << '\n'
     << "variant=" << to_string(variant) << '\n'
     << "superpixels=" << sppp.slic.superpixels << '\n'
     << "slic_distance=" << kDistanceNames[std::size_t(sppp.slic.distance)] << '\n'
     << "slic_alpha=" << format_double(sppp.slic.alpha) << '\n'
     << "slic_compactness=" << format_double(sppp.slic.compactness) << '\n'
     << "slic_max_iter=" << sppp.slic.max_iter << '\n'
     << "slic_merge_orphans=" << (sppp.slic.merge_orphans ? "true" : "false") << '\n'
     << "assignment=" << kAssignmentNames[std::size_t(sppp.assignment)] << '\n'
     << "tau=" << format_double(sppp.tau) << '\n'
     << "pooling=" << kPoolingNames[std::size_t(sppp.pooling)] << '\n'
     << "latent_mode=" << kLatentNames[std::size_t(latent_mode)] << '\n'
     << "class_token=" << (class_token ? "true" : "false") << '\n'
     << "ln_eps=" << format_double(ln_eps) << '\n';
  return os.str();
}

std::uint64_t ModelConfig::digest() const { return fnv1a(serialize()); }

bool ModelConfig::apply(std::string_view key, std::string_view value) {
  auto size = [&](std::size_t& field) { field = std::size_t(parse_u64(value, key)); };
  if (key == "image_height") size(image_height);
  else if (key == "image_width") size(image_width);
  else if (key == "patch") size(patch);
  else if (key == "dim") size(dim);
  else if (key == "layers") size(layers);
  else if (key == "heads") size(heads);
  else if (key == "ffn") size(ffn);
  else if (key == "num_classes") size(classes);
  else if (key == "latents") size(latents);
  else if (key == "pe_hidden") size(pe_hidden);
  else if (key == "variant") variant = parse_variant(value);
  else if (key == "superpixels") size(sppp.slic.superpixels);
  else if (key == "slic_distance") sppp.slic.distance = parse_enum<SlicDistance>(value, kDistanceNames, key);
  else if (key == "slic_alpha") sppp.slic.alpha = parse_double(value, key);
  else if (key == "slic_compactness") sppp.slic.compactness = parse_double(value, key);
  else if (key == "slic_max_iter") size(sppp.slic.max_iter);
  else if (key == "slic_merge_orphans") sppp.slic.merge_orphans = parse_bool(value, key);
  else if (key == "assignment") sppp.assignment = parse_enum<AssignmentMode>(value, kAssignmentNames, key);
  else if (key == "tau") sppp.tau = parse_double(value, key);
  else if (key == "pooling") sppp.pooling = parse_enum<PoolingMode>(value, kPoolingNames, key);
  else if (key == "latent_mode") latent_mode = parse_enum<LatentMode>(value, kLatentNames, key);
  else if (key == "class_token") class_token = parse_bool(value, key);
  else if (key == "ln_eps") ln_eps = parse_double(value, key);
  else return false;
  return true;
}

ModelConfig ModelConfig::parse(std::string_view text) {
  ModelConfig cfg;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    if (raw.empty() || raw.front() == '#') continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    const auto key = trim(std::string_view(raw).substr(0, eq));
    if (!cfg.apply(key, trim(std::string_view(raw).substr(eq + 1)))) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  return cfg;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg_.dim;
  const std::size_t x_max = cfg_.max_sequence();
  Initializer init(seed);

  patch_embedding_ = &params_.add("patch_embed", init.xavier(cfg_.patch * cfg_.patch * 3, d));
  if (cfg_.class_token) cls_token_ = &params_.add("cls_token", init.uniform({1, d}, -0.02, 0.02));
  if (uses_sppp(cfg_.variant)) {
    pe_mlp_.push_back(init.linear(params_, "pe.0", 2, cfg_.pe_hidden));
    pe_mlp_.push_back(init.linear(params_, "pe.1", cfg_.pe_hidden, d));
  } else {
    pos_embedding_ = &params_.add("pos_embed", init.uniform({x_max, d}, -0.02, 0.02));
  }

  const bool latent = uses_lla(cfg_.variant);
  if (latent) {
    if (cfg_.class_token) class_latent_ = &params_.add("class_latent", init.uniform({1, d}, -0.02, 0.02));
    const std::size_t rows = cfg_.latents - (cfg_.class_token ? 1 : 0);
    if (rows > 0) compressor_ = make_compressor(init, params_, "compress", rows, x_max, d, cfg_.latent_mode);
  }

  for (std::size_t b = 0; b < cfg_.layers; ++b) {
    const std::string name = "block" + std::to_string(b);
    EncoderBlock blk;
    blk.latent = latent;
    if (latent) blk.context_norm = init.layer_norm(params_, name + ".ctx_norm", d);
    blk.norm1 = init.layer_norm(params_, name + ".norm1", d);
    blk.attention = make_attention(init, params_, name + ".attn", d, cfg_.heads);
    blk.norm2 = init.layer_norm(params_, name + ".norm2", d);
    blk.ffn_in = init.linear(params_, name + ".ffn.0", d, cfg_.ffn);
    blk.ffn_out = init.linear(params_, name + ".ffn.1", cfg_.ffn, d);
    for (auto* ln : {&blk.norm1, &blk.norm2, &blk.context_norm}) ln->eps = cfg_.ln_eps;
    blocks_.push_back(blk);
  }
  final_norm_ = init.layer_norm(params_, "final_norm", d);
  final_norm_.eps = cfg_.ln_eps;
  head_ = init.linear(params_, "head", d, cfg_.classes);
}

PreparedImage Model::prepare(const ImageRGB& img) const {
  if (img.height != cfg_.image_height || img.width != cfg_.image_width) {
    throw GeometryError("image is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                        ", model expects " + std::to_string(cfg_.image_height) + "x" +
                        std::to_string(cfg_.image_width));
  }
  PreparedImage p;
  if (uses_sppp(cfg_.variant)) {
    p.plan = plan_sppp(img, cfg_.patch, cfg_.sppp);
    p.patches = p.plan->patches;
  } else {
    p.patches = patch_matrix(patchify(img, cfg_.patch), img);
  }
  return p;
}

Var Model::embed(Tape& tape, const PreparedImage& input, ForwardTrace* trace) {
  Var z;
  std::size_t tokens = 0;
  if (uses_sppp(cfg_.variant)) {
    if (!input.plan) throw ConfigError("SPPP variant needs a prepared superpixel plan");
    TokenSequence seq = sppp_tokens(tape, *input.plan, *patch_embedding_, pe_mlp_);
    z = seq.tokens;
    tokens = seq.size();
  } else {
    z = patch_embed(tape, tape.constant(input.patches), *patch_embedding_);
    tokens = z.rows();
  }
  if (cls_token_ != nullptr) {
    const std::array<Var, 2> parts{tape.param(*cls_token_), z};
    z = concat_rows(parts);
  }
  if (pos_embedding_ != nullptr) {
    if (z.rows() != pos_embedding_->value().rows()) {
      throw DimensionError("fixed-grid positional table has " + std::to_string(pos_embedding_->value().rows()) +
                           " rows for a sequence of " + std::to_string(z.rows()));
    }
    z = add(z, tape.param(*pos_embedding_));
  }
  if (trace != nullptr) {
    trace->tokens = tokens;
    trace->sequence = z.rows();
  }
  return z;
}

namespace {

Var feed_forward(Tape& tape, Var x, const EncoderBlock& blk) {
  Var h = activate(linear(tape, layer_norm(tape, x, blk.norm2), blk.ffn_in), Activation::gelu);
  return add(x, linear(tape, h, blk.ffn_out));
}

void record_layer(ForwardTrace* trace, const Tape& tape, std::uint64_t before, const AttentionResult& a) {
  if (trace == nullptr) return;
  trace->score_entries_per_layer.push_back(tape.counters().score_entries - before);
  trace->attention_weights.push_back(a.weights);
  trace->value_heads.push_back(a.v_heads);
  trace->head_outputs.push_back(a.head_outputs);
}

}  // namespace

Var Model::self_attention_stack(Tape& tape, Var x, ForwardTrace* trace) {
  for (const auto& blk : blocks_) {
    const std::uint64_t before = tape.counters().score_entries;
    Var u = layer_norm(tape, x, blk.norm1);
    AttentionResult a = multi_head_attention(tape, u, u, blk.attention);
    record_layer(trace, tape, before, a);
    x = feed_forward(tape, add(x, a.output), blk);
  }
  return x;
}

Var Model::latent_stack(Tape& tape, Var h, ForwardTrace* trace) {
  Var z;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    const std::uint64_t before = tape.counters().score_entries;
    Var context = layer_norm(tape, h, blk.context_norm);
    if (b == 0) {
      std::vector<Var> parts;
      if (class_latent_ != nullptr) parts.push_back(tape.param(*class_latent_));
      if (compressor_.rows > 0) parts.push_back(compress_queries(tape, context, compressor_));
      z = parts.size() == 1 ? parts.front() : concat_rows(parts);
    }
    Var queries = layer_norm(tape, z, blk.norm1);
    AttentionResult a = multi_head_attention(tape, queries, context, blk.attention);
    record_layer(trace, tape, before, a);
    z = feed_forward(tape, add(z, a.output), blk);
  }
  return z;
}

Var Model::readout(Tape& tape, Var x) {
  Var y = layer_norm(tape, x, final_norm_);
  Var r = cfg_.class_token ? slice_rows(y, 0, 1) : mean_rows(y);
  return linear(tape, r, head_);
}

Var Model::logits(Tape& tape, const PreparedImage& input, ForwardTrace* trace) {
  Var x = embed(tape, input, trace);
  x = uses_lla(cfg_.variant) ? latent_stack(tape, x, trace) : self_attention_stack(tape, x, trace);
  return readout(tape, x);
}

Tensor Model::forward(std::span<const PreparedImage> batch) {
  Tensor out({batch.size(), cfg_.classes});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape tape(false);
    const Tensor& row = logits(tape, batch[i]).value();
    std::copy(row.data().begin(), row.data().end(), out.row(i).begin());
  }
  return out;
}

Tensor Model::forward(std::span<const ImageRGB> images) {
  std::vector<PreparedImage> prepared;
  prepared.reserve(images.size());
  for (const auto& img : images) prepared.push_back(prepare(img));
  return forward(prepared);
}

std::size_t parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.dim, f = cfg.ffn, x = cfg.max_sequence();
  const std::size_t ln = 2 * d;
  const std::size_t attn = 4 * d * d + 3 * d;  // no key bias
  const std::size_t ffn = d * f + f + f * d + d;
  std::size_t n = 3 * cfg.patch * cfg.patch * d;
  if (cfg.class_token) n += d;
  if (uses_sppp(cfg.variant)) {
    n += 2 * cfg.pe_hidden + cfg.pe_hidden + cfg.pe_hidden * d + d;
  } else {
    n += x * d;
  }
  if (uses_lla(cfg.variant)) {
    const std::size_t rows = cfg.latents - (cfg.class_token ? 1 : 0);
    if (cfg.class_token) n += d;
    n += rows * (cfg.latent_mode == LatentMode::token_mixing ? x : d);
    n += cfg.layers * (attn + ffn + 3 * ln);
  } else {
    n += cfg.layers * (attn + ffn + 2 * ln);
  }
  return n + ln + d * cfg.classes + cfg.classes;
}

void AdamW::step(ParameterStore& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value().shape());
      v_.emplace_back(p.value().shape());
    }
  }
  if (m_.size() != params.size()) throw DimensionError("AdamW: parameter set changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  std::size_t i = 0;
  for (auto& p : params) {
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    ++i;
    Tensor& w = p.value();
    const Tensor& g = p.grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      const double mh = m[k] / c1;
      const double vh = v[k] / c2;
      w[k] -= cfg_.lr * (mh / (std::sqrt(vh) + cfg_.eps) + cfg_.weight_decay * w[k]);
    }
    round_to_float(w);
  }
}

TrainState build_model(const ModelConfig& cfg, std::uint64_t seed, AdamWConfig optimizer) {
  TrainState s{std::make_unique<Model>(cfg, seed), AdamW(optimizer), 0, 0, seed};
  return s;
}

namespace {

int argmax_row(const Tensor& t, std::size_t r) {
  auto row = t.row(r);
  return int(std::max_element(row.begin(), row.end()) - row.begin());
}

void check_labels(std::span<const int> labels, std::size_t classes, std::size_t count) {
  if (labels.size() != count) {
    throw DimensionError(std::to_string(count) + " images but " + std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || std::size_t(y) >= classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

double train_step(TrainState& state, std::span<const PreparedImage> batch, std::span<const int> labels,
                  std::vector<int>* predictions) {
  Model& model = *state.model;
  if (batch.empty()) throw DimensionError("train_step: empty batch");
  check_labels(labels, model.config().classes, batch.size());

  Tape tape;
  std::vector<Var> rows;
  rows.reserve(batch.size());
  for (const auto& item : batch) rows.push_back(model.logits(tape, item));
  Var all = rows.size() == 1 ? rows.front() : concat_rows(rows);
  Var loss = cross_entropy(all, labels);
  const double value = loss.value()[0];
  if (!std::isfinite(value)) {
    throw NumericError("non-finite loss at step " + std::to_string(state.step));
  }
  if (predictions != nullptr) {
    predictions->clear();
    for (std::size_t i = 0; i < batch.size(); ++i) predictions->push_back(argmax_row(all.value(), i));
  }
  tape.backward(loss);
  for (const auto& p : model.parameters()) {
    if (!p.grad().all_finite()) {
      throw NumericError("non-finite gradient for " + p.name() + " at step " + std::to_string(state.step) +
                         " (loss " + format_double(value) + ")");
    }
  }
  state.optimizer.step(model.parameters());
  model.parameters().zero_grad();
  ++state.step;
  return value;
}

std::vector<int> predict(Model& model, std::span<const PreparedImage> images) {
  const Tensor logits = model.forward(images);
  std::vector<int> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) out[i] = argmax_row(logits, i);
  return out;
}

double evaluate(Model& model, std::span<const PreparedImage> images, std::span<const int> labels) {
  if (images.empty()) throw DataError("evaluate: empty split");
  check_labels(labels, model.config().classes, images.size());
  const auto pred = predict(model, images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
  return double(correct) / double(images.size());
}

std::vector<EpochMetrics> train(TrainState& state, const PreparedSplit& train_split, const PreparedSplit& test_split,
                                const TrainOptions& options, const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (train_split.images.empty()) throw DataError("train: empty training split");
  if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<EpochMetrics> history;
  std::vector<std::size_t> order(train_split.images.size());
  for (std::size_t e = 0; e < options.epochs; ++e) {
    if (options.max_steps != 0 && state.step >= options.max_steps) break;
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(state.seed ^ (0x9e3779b97f4a7c15ULL * (state.epoch + 1)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t seen = 0, correct = 0;
    std::vector<PreparedImage> batch;
    std::vector<int> labels, pred;
    for (std::size_t b = 0; b < order.size(); b += options.batch_size) {
      if (options.max_steps != 0 && state.step >= options.max_steps) break;
      const std::size_t end = std::min(order.size(), b + options.batch_size);
      batch.clear();
      labels.clear();
      for (std::size_t i = b; i < end; ++i) {
        batch.push_back(train_split.images[order[i]]);
        labels.push_back(train_split.labels[order[i]]);
      }
      loss_sum += train_step(state, batch, labels, &pred) * double(batch.size());
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
      seen += batch.size();
    }
    ++state.epoch;
    EpochMetrics m;
    m.epoch = state.epoch;
    m.train_loss = seen ? loss_sum / double(seen) : 0.0;
    m.train_accuracy = seen ? double(correct) / double(seen) : 0.0;
    m.test_accuracy = test_split.images.empty() ? 0.0 : evaluate(*state.model, test_split.images, test_split.labels);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

namespace {

constexpr std::array<char, 4> kMagic{'F', 'A', 'V', '1'};

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(char((std::uint64_t(v) >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <class T>
  T get(std::string_view what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(std::uint8_t(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return T(v);
  }
  std::string bytes(std::size_t n, std::string_view what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n, std::string_view what) const {
    if (data_.size() - pos_ < n) {
      throw DataError("checkpoint truncated while reading " + std::string(what) + " at byte " + std::to_string(pos_));
    }
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::string out(kMagic.begin(), kMagic.end());
  put_le<std::uint64_t>(out, model.config().digest());
  put_le<std::uint32_t>(out, std::uint32_t(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    put_le<std::uint32_t>(out, std::uint32_t(p.name().size()));
    out += p.name();
    const Shape& shape = p.value().shape();
    put_le<std::uint32_t>(out, std::uint32_t(shape.size()));
    for (std::size_t e : shape) put_le<std::uint64_t>(out, e);
    for (double v : p.value().data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(float(v)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path.string());
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw DataError("failed writing checkpoint: " + path.string());
}

void load_checkpoint(Model& model, const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(f), {}));

  if (r.bytes(4, "magic") != std::string(kMagic.begin(), kMagic.end())) {
    throw DataError("not a checkpoint (bad magic): " + path.string());
  }
  const auto digest = r.get<std::uint64_t>("config digest");
  if (digest != model.config().digest()) {
    throw ConfigError("checkpoint was saved from a different model configuration: " + path.string());
  }
  const auto count = r.get<std::uint32_t>("parameter count");
  if (count != model.parameters().size()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                    std::to_string(model.parameters().size()));
  }
  std::vector<Tensor> loaded;
  auto it = model.parameters().begin();
  for (std::uint32_t i = 0; i < count; ++i, ++it) {
    const std::string name = r.bytes(r.get<std::uint32_t>("name length"), "name");
    if (name != it->name()) throw DataError("checkpoint parameter '" + name + "' where '" + it->name() + "' expected");
    Shape shape(r.get<std::uint32_t>("rank"));
    for (auto& e : shape) e = std::size_t(r.get<std::uint64_t>("extent"));
    if (shape != it->value().shape()) {
      throw DataError("parameter " + name + " has shape " + shape_string(shape) + ", model expects " +
                      it->value().shape_string());
    }
    Tensor t(shape);
    for (auto& v : t.data()) v = double(std::bit_cast<float>(r.get<std::uint32_t>(name)));
    loaded.push_back(std::move(t));
  }
  if (!r.done()) throw DataError("trailing bytes after the last parameter in " + path.string());
  std::size_t i = 0;
  for (auto& p : model.parameters()) {
    p.value() = std::move(loaded[i++]);
    p.zero_grad();
  }
}

}  // namespace fav
