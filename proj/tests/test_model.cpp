#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fav/datasets.hpp"
#include "fav/error.hpp"
#include "fav/model.hpp"
#include "support.hpp"

using namespace fav;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny(Variant v) {
  ModelConfig c = ModelConfig::desk();
  c.image_height = c.image_width = 16;
  c.dim = 8;
  c.heads = 2;
  c.ffn = 8;
  c.layers = 1;
  c.classes = 3;
  c.latents = 4;
  c.pe_hidden = 6;
  c.sppp.slic.superpixels = 4;
  c.variant = v;
  return c;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("fav_test_" + name); }

std::vector<PreparedImage> prepare_all(const Model& m, const std::vector<ImageRGB>& images) {
  std::vector<PreparedImage> out;
  for (const auto& img : images) out.push_back(m.prepare(img));
  return out;
}

// Plain reimplementations for the staged oracle.
Tensor oracle_ln(const Tensor& x, const Tensor& g, const Tensor& b, double eps) {
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double m = 0.0, v = 0.0;
    for (double e : x.row(r)) m += e;
    m /= double(x.cols());
    for (double e : x.row(r)) v += (e - m) * (e - m);
    v /= double(x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = g[c] * (x(r, c) - m) / std::sqrt(v + eps) + b[c];
  }
  return y;
}

Tensor oracle_affine(const Tensor& x, const Parameter& w, const Parameter* b) {
  Tensor y = fav::testing::naive_matmul(x, w.value());
  if (b)
    for (std::size_t r = 0; r < y.rows(); ++r)
      for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b->value()[c];
  return y;
}

Tensor oracle_add(Tensor a, const Tensor& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

}  // namespace

TEST_CASE("desk baseline parameter count") {
  // Desk preset on 32x32, P=4: N=64, X=65, D=F=64, 2 layers, 10 classes.
  //   embed 48*64 + cls 64 + pos 65*64                   = 7296
  //   per layer: attn 4*64^2 + 3*64, ffn 2*64*64 + 64 + 64, 2 norms 4*64
  //            = 16576 + 8320 + 256 = 25152, two layers    = 50304
  //   final norm 128 + head 64*10 + 10                     = 778
  ModelConfig c = ModelConfig::desk();
  c.variant = Variant::baseline;
  CHECK(parameter_count(c) == 58378);
  CHECK(Model(c, 1).parameters().scalar_count() == 58378);
  for (Variant v : {Variant::sppp, Variant::lla, Variant::sppp_lla}) {
    c.variant = v;
    CHECK(Model(c, 1).parameters().scalar_count() == parameter_count(c));
  }
  c.latent_mode = LatentMode::free_latents;
  CHECK(Model(c, 1).parameters().scalar_count() == parameter_count(c));
  c.class_token = false;
  CHECK(Model(c, 1).parameters().scalar_count() == parameter_count(c));
}

TEST_CASE("sixteen superpixels give a 17-row sequence") {
  ModelConfig c = ModelConfig::desk();
  c.variant = Variant::sppp_lla;
  c.sppp.slic.superpixels = 16;
  Model m(c, 2);
  const PreparedImage p = m.prepare(fav::testing::block_image(32, 32, 4, 4));
  REQUIRE(p.plan->tokens() == 16);
  Tape tape(false);
  ForwardTrace trace;
  m.logits(tape, p, &trace);
  CHECK(trace.tokens == 16);
  CHECK(trace.sequence == 17);
  for (auto n : trace.score_entries_per_layer) CHECK(n == c.heads * c.latents * 17);
  CHECK(tape.counters().largest_score_rows == c.latents);
  CHECK(tape.counters().largest_score_cols == 17);
}

TEST_CASE("initialization is a function of the seed") {
  const auto images = synthetic_halves(3, 32, 32, 0.1, 4).images;
  for (Variant v : {Variant::baseline, Variant::sppp_lla}) {
    ModelConfig c = ModelConfig::desk();
    c.variant = v;
    Model a(c, 9), b(c, 9), other(c, 10);
    const Tensor ya = a.forward(images);
    CHECK(ya == b.forward(images));
    CHECK_FALSE(ya == other.forward(images));
  }
}

TEST_CASE("zero head gives uniform logits; identical images give identical rows") {
  ModelConfig c = ModelConfig::desk();
  Model m(c, 3);
  m.head().weight->value().fill(0.0);
  m.head().bias->value().fill(0.0);
  const ImageRGB img = fav::testing::random_image(32, 32, 5);
  const std::vector<ImageRGB> pair{img, img};
  const Tensor y = m.forward(pair);
  for (double v : y.data()) CHECK(v == 0.0);

  Model fresh(c, 3);
  const Tensor z = fresh.forward(pair);
  for (std::size_t k = 0; k < c.classes; ++k) CHECK(z(0, k) == z(1, k));
}

TEST_CASE("baseline forward equals the stage-by-stage composition") {
  ModelConfig c = tiny(Variant::baseline);
  c.image_height = c.image_width = 8;
  Model m(c, 12);
  Initializer init(13);
  for (auto& p : m.parameters()) p.value() = init.uniform(p.value().shape(), -0.3, 0.3);
  const ImageRGB img = fav::testing::random_image(8, 8, 14);
  const PreparedImage in = m.prepare(img);
  Tape tape(false);
  const Tensor got = m.logits(tape, in).value();

  auto P = [&](const char* n) -> const Parameter& { return m.parameters().at(n); };
  // tokens
  const Tensor z = fav::testing::naive_matmul(patch_matrix(patchify(img, 4), img), P("patch_embed").value());
  Tensor x({z.rows() + 1, c.dim});
  for (std::size_t d = 0; d < c.dim; ++d) x(0, d) = P("cls_token").value()[d];
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t d = 0; d < c.dim; ++d) x(r + 1, d) = z(r, d);
  x = oracle_add(x, P("pos_embed").value());
  // attention block
  const Tensor u = oracle_ln(x, P("block0.norm1.gain").value(), P("block0.norm1.bias").value(), c.ln_eps);
  const Tensor q = oracle_affine(u, P("block0.attn.q.weight"), &P("block0.attn.q.bias"));
  const Tensor k = oracle_affine(u, P("block0.attn.k.weight"), nullptr);
  const Tensor v = oracle_affine(u, P("block0.attn.v.weight"), &P("block0.attn.v.bias"));
  const std::size_t hd = c.dim / c.heads, X = x.rows();
  Tensor cat({X, c.dim});
  for (std::size_t h = 0; h < c.heads; ++h) {
    for (std::size_t i = 0; i < X; ++i) {
      std::vector<double> s(X);
      double mx = -1e300, tot = 0.0;
      for (std::size_t j = 0; j < X; ++j) {
        double dot = 0.0;
        for (std::size_t e = 0; e < hd; ++e) dot += q(i, h * hd + e) * k(j, h * hd + e);
        s[j] = dot / std::sqrt(double(hd));
        mx = std::max(mx, s[j]);
      }
      for (auto& e : s) tot += (e = std::exp(e - mx));
      for (std::size_t e = 0; e < hd; ++e) {
        double acc = 0.0;
        for (std::size_t j = 0; j < X; ++j) acc += s[j] / tot * v(j, h * hd + e);
        cat(i, h * hd + e) = acc;
      }
    }
  }
  x = oracle_add(x, oracle_affine(cat, P("block0.attn.o.weight"), &P("block0.attn.o.bias")));
  Tensor f = oracle_affine(oracle_ln(x, P("block0.norm2.gain").value(), P("block0.norm2.bias").value(), c.ln_eps),
                           P("block0.ffn.0.weight"), &P("block0.ffn.0.bias"));
  for (auto& e : f.data()) e = 0.5 * e * (1.0 + std::erf(e / std::sqrt(2.0)));
  x = oracle_add(x, oracle_affine(f, P("block0.ffn.1.weight"), &P("block0.ffn.1.bias")));
  const Tensor y = oracle_ln(x, P("final_norm.gain").value(), P("final_norm.bias").value(), c.ln_eps);
  Tensor cls({1, c.dim});
  for (std::size_t d = 0; d < c.dim; ++d) cls[d] = y(0, d);
  const Tensor expect = oracle_affine(cls, P("head.weight"), &P("head.bias"));
  CHECK(max_abs_diff(got, expect) < 1e-12);
}

TEST_CASE("first step loss is the mean cross entropy of the initial logits") {
  ModelConfig c = ModelConfig::desk();
  const auto data = synthetic_halves(16, 32, 32, 0.15, 1);
  std::vector<int> labels(data.labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = int(i % 10);
  for (Variant v : {Variant::baseline, Variant::sppp_lla}) {
    c.variant = v;
    TrainState s = build_model(c, 5);
    const auto batch = prepare_all(*s.model, data.images);
    const Tensor y = s.model->forward(batch);
    double expect = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      double mx = -1e300, z = 0.0;
      for (std::size_t k = 0; k < 10; ++k) mx = std::max(mx, y(i, k));
      for (std::size_t k = 0; k < 10; ++k) z += std::exp(y(i, k) - mx);
      expect += mx + std::log(z) - y(i, std::size_t(labels[i]));
    }
    expect /= double(labels.size());
    const double loss = train_step(s, batch, labels);
    CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
    CHECK(loss > 0.0);
  }
}

TEST_CASE("lr = 0 leaves parameters unchanged but updates the moments") {
  ModelConfig c = tiny(Variant::sppp_lla);
  AdamWConfig opt;
  opt.lr = 0.0;
  TrainState s = build_model(c, 6, opt);
  std::vector<Tensor> before;
  for (const auto& p : s.model->parameters()) before.push_back(p.value());
  const auto data = synthetic_halves(4, 16, 16, 0.1, 2);
  const auto batch = prepare_all(*s.model, data.images);
  train_step(s, batch, data.labels);
  std::size_t i = 0, moved = 0;
  for (const auto& p : s.model->parameters()) {
    CHECK(p.value() == before[i]);
    for (double g : p.grad().data()) CHECK(g == 0.0);
    for (double mo : s.optimizer.first_moment(i).data()) moved += mo != 0.0;
    ++i;
  }
  CHECK(moved > 0);
  CHECK(s.optimizer.steps() == 1);
  CHECK(s.step == 1);
}

TEST_CASE("training separates a two-class synthetic set") {
  ModelConfig c = ModelConfig::desk();
  c.classes = 2;
  c.variant = Variant::sppp_lla;
  AdamWConfig opt;
  opt.lr = 1e-3;
  TrainState s = build_model(c, 3, opt);
  const auto train = synthetic_halves(64, 32, 32, 0.15, 7);
  const auto batch_all = prepare_all(*s.model, train.images);
  double last = 0.0;
  std::vector<PreparedImage> batch;
  std::vector<int> labels;
  for (std::size_t step = 0; step < 200; ++step) {
    batch.clear();
    labels.clear();
    for (std::size_t i = 0; i < 8; ++i) {
      const std::size_t k = (step * 8 + i) % batch_all.size();
      batch.push_back(batch_all[k]);
      labels.push_back(train.labels[k]);
    }
    last = train_step(s, batch, labels);
  }
  CHECK(last < 0.1);
  CHECK(evaluate(*s.model, batch_all, train.labels) == 1.0);
}

TEST_CASE("an untrained model is at chance on a balanced ten-class split") {
  ModelConfig c = ModelConfig::desk();
  c.variant = Variant::baseline;
  Model m(c, 8);
  std::vector<ImageRGB> images;
  std::vector<int> labels;
  for (std::size_t i = 0; i < 300; ++i) {
    images.push_back(fav::testing::random_image(32, 32, 1000 + i));
    labels.push_back(int(i % 10));
  }
  const auto prepared = prepare_all(m, images);
  const double acc = evaluate(m, prepared, labels);
  CHECK(std::abs(acc - 0.1) <= 0.03);
  CHECK(evaluate(m, prepared, labels) == acc);
  CHECK_THROWS_AS(evaluate(m, std::vector<PreparedImage>{}, std::vector<int>{}), DataError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  for (Variant v : {Variant::baseline, Variant::sppp_lla}) {
    ModelConfig c = tiny(v);
    TrainState s = build_model(c, 4, AdamWConfig{1e-2});
    const auto data = synthetic_halves(4, 16, 16, 0.1, 3);
    const auto batch = prepare_all(*s.model, data.images);
    train_step(s, batch, data.labels);
    const fs::path path = temp_file("roundtrip.fav");
    save_checkpoint(*s.model, path);
    Model loaded(c, 99);
    load_checkpoint(loaded, path);
    CHECK(loaded.forward(batch) == s.model->forward(batch));
    fs::remove(path);
  }
}

TEST_CASE("damaged or mismatched checkpoints are rejected") {
  ModelConfig c = tiny(Variant::baseline);
  Model m(c, 1);
  const fs::path path = temp_file("damaged.fav");
  save_checkpoint(m, path);
  std::string bytes;
  {
    std::ifstream f(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << b;
  };
  Model target(c, 2);
  const Tensor before = target.parameters().at("head.weight").value();

  write(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(target, path), DataError);
  CHECK(target.parameters().at("head.weight").value() == before);

  write("XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(load_checkpoint(target, path), DataError);

  write(bytes + "z");
  CHECK_THROWS_AS(load_checkpoint(target, path), DataError);

  write(bytes);
  ModelConfig other = c;
  other.dim = 16;
  Model wrong(other, 1);
  CHECK_THROWS_AS(load_checkpoint(wrong, path), ConfigError);
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(target, path), DataError);
}

TEST_CASE("configuration text round trip and validation") {
  ModelConfig c = ModelConfig::desk();
  c.variant = Variant::lla;
  c.sppp.slic.superpixels = 9;
  c.sppp.assignment = AssignmentMode::threshold;
  c.sppp.tau = 0.3;
  const std::string text = c.serialize();
  CHECK(ModelConfig::parse(text).serialize() == text);
  CHECK(ModelConfig::parse(text).digest() == c.digest());
  CHECK(ModelConfig::desk().digest() != c.digest());
  CHECK_THROWS_AS(ModelConfig::parse("dimm=3\n"), ConfigError);

  CHECK(parse_variant("sppp-only") == Variant::sppp);
  CHECK(parse_variant("lla-only") == Variant::lla);
  CHECK(parse_variant("sppp+lla") == Variant::sppp_lla);
  CHECK_THROWS_AS(parse_variant("vit"), ConfigError);

  ModelConfig bad = ModelConfig::desk();
  bad.variant = Variant::lla;
  bad.latents = 65;  // N + 1 on 32x32 with P=4
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.latents = 64;
  CHECK_NOTHROW(bad.validate());
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ModelConfig::desk();
  bad.image_width = 30;
  CHECK_THROWS_AS(bad.validate(), GeometryError);
  CHECK_THROWS_AS(Model(ModelConfig::desk(), 0).prepare(ImageRGB(16, 16)), GeometryError);
}

TEST_CASE("train_step rejects bad labels") {
  TrainState s = build_model(tiny(Variant::baseline), 1);
  const auto data = synthetic_halves(2, 16, 16, 0.1, 1);
  const auto batch = prepare_all(*s.model, data.images);
  CHECK_THROWS_AS(train_step(s, batch, std::vector<int>{0, 3}), DataError);
  CHECK_THROWS_AS(train_step(s, batch, std::vector<int>{0}), DimensionError);
}

TEST_CASE("non-finite parameters abort with the stage named") {
  TrainState s = build_model(tiny(Variant::baseline), 1);
  s.model->parameters().at("head.bias").value()[0] = std::nan("");
  const auto data = synthetic_halves(2, 16, 16, 0.1, 1);
  const auto batch = prepare_all(*s.model, data.images);
  CHECK_THROWS_AS(train_step(s, batch, data.labels), NumericError);
}

TEST_CASE("shuffled training is reproducible") {
  auto run = [] {
    ModelConfig c = tiny(Variant::sppp_lla);
    c.classes = 2;
    TrainState s = build_model(c, 21);
    const auto tr = synthetic_halves(12, 16, 16, 0.1, 1), te = synthetic_halves(6, 16, 16, 0.1, 2);
    PreparedSplit a{prepare_all(*s.model, tr.images), tr.labels}, b{prepare_all(*s.model, te.images), te.labels};
    TrainOptions o;
    o.epochs = 2;
    o.batch_size = 4;
    std::vector<double> out;
    for (const auto& m : train(s, a, b, o)) out.insert(out.end(), {m.train_loss, m.train_accuracy, m.test_accuracy});
    return out;
  };
  CHECK(run() == run());
}
