#include "fav/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "fav/bench.hpp"
#include "fav/datasets.hpp"
#include "fav/error.hpp"
#include "fav/text.hpp"

namespace fav {

namespace {

namespace fs = std::filesystem;

constexpr const char* kExitHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  unexpected internal error\n"
    "  2  configuration or geometry error (bad flag, unknown config key, image/patch mismatch)\n"
    "  3  data error (missing, truncated or malformed dataset or checkpoint file)\n"
    "  4  numeric or dimension error (non-finite values, shape mismatch)\n"
    "  5  acceptance failure (gradient check above tolerance, cost accounting mismatch)\n";

DatasetPair load_data(const RunConfig& rc) {
  DatasetPair data;
  const std::size_t h = rc.model.image_height, w = rc.model.image_width;
  if (rc.format == "synthetic") {
    data.train = synthetic_halves(rc.train_limit ? rc.train_limit : 500, h, w, 0.15, rc.seed, "train");
    data.test = synthetic_halves(rc.test_limit ? rc.test_limit : 200, h, w, 0.15, rc.seed + 1, "test");
    return data;
  }
  if (rc.dataset.empty()) throw ConfigError("format " + rc.format + " needs dataset=<directory>");
  if (rc.format == "cifar10") {
    data = load_cifar10_filtered(rc.dataset, rc.classes, rc.train_limit, rc.test_limit);
  } else {
    data = load_fashion_mnist(rc.dataset);
  }
  auto restrict = [&](DatasetSplit& s, std::size_t limit) {
    if (!rc.classes.empty()) {
      s = subset_classes(s, rc.classes, limit);
    } else if (limit != 0 && s.size() > limit) {
      s.images.resize(limit);
      s.labels.resize(limit);
    }
    for (auto& img : s.images) img = fit_to_canvas(img, h, w);
    s.validate();
  };
  restrict(data.train, rc.train_limit);
  restrict(data.test, rc.test_limit);
  return data;
}

PreparedSplit prepare_split(const Model& model, const DatasetSplit& split) {
  PreparedSplit p;
  p.labels = split.labels;
  p.images.reserve(split.size());
  for (const auto& img : split.images) p.images.push_back(model.prepare(img));
  return p;
}

fs::path ensure_out(const RunConfig& rc) {
  fs::path dir(rc.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + rc.out + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

const ImageRGB& pick_image(const DatasetPair& data, std::size_t index) {
  if (index >= data.test.size()) {
    throw ConfigError("image=" + std::to_string(index) + " but the test split has " + std::to_string(data.test.size()) +
                      " images");
  }
  return data.test.images[index];
}

int cmd_segment(const RunConfig& rc, std::ostream& out) {
  const auto data = load_data(rc);
  const ImageRGB& img = pick_image(data, rc.image);
  const SuperpixelMap map = slic_segment(rgb_to_lab(img), rc.model.sppp.slic);
  std::ostringstream os;
  os << map.height << ' ' << map.width << ' ' << map.regions << '\n';
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x) os << (x ? " " : "") << map.labels[y * map.width + x];
    os << '\n';
  }
  const fs::path path = ensure_out(rc) / "segment.txt";
  write_text(path, os.str());
  out << "regions=" << map.regions << " iterations=" << map.iterations << " spacing=" << format_double(map.spacing)
      << " labels=" << path.string() << '\n';
  return kExitOk;
}

int cmd_tokenize(const RunConfig& rc, std::ostream& out) {
  const auto data = load_data(rc);
  ModelConfig cfg = rc.model;
  cfg.variant = Variant::sppp;
  Model model(cfg, rc.seed);
  const PreparedImage input = model.prepare(pick_image(data, rc.image));
  const SpppPlan& plan = *input.plan;
  Tape tape(false);
  const Tensor tokens = model.embed(tape, input).value();
  const std::size_t first = cfg.class_token ? 1 : 0;
  std::ostringstream os;
  os << "patches=" << plan.grid.count() << " regions=" << plan.segmentation.regions << " tokens=" << plan.tokens()
     << '\n';
  for (std::size_t g = 0; g < plan.tokens(); ++g) {
    const auto members = plan.assignment.members(g);
    os << "token=" << g << " superpixel=" << plan.assignment.group_superpixel[g] << " patches=" << members.size()
       << " centroid=" << format_double(plan.centroids[g].nx) << ',' << format_double(plan.centroids[g].ny);
    double norm = 0.0;
    for (double v : tokens.row(first + g)) norm += v * v;
    os << " norm=" << format_double(std::sqrt(norm)) << " members=";
    for (std::size_t i = 0; i < members.size(); ++i) os << (i ? "," : "") << members[i];
    os << '\n';
  }
  const fs::path path = ensure_out(rc) / "tokens.txt";
  write_text(path, os.str());
  out << "patches=" << plan.grid.count() << " tokens=" << plan.tokens() << " report=" << path.string() << '\n';
  return kExitOk;
}

ModelConfig data_model(const RunConfig& rc, const DatasetPair& data) {
  ModelConfig cfg = rc.model;
  cfg.classes = rc.classes.empty() ? data.train.classes : rc.classes.size();
  return cfg;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const auto data = load_data(rc);
  const fs::path dir = ensure_out(rc);
  RunConfig effective = rc;
  effective.model = data_model(rc, data);
  write_text(dir / "run.cfg", effective.serialize());

  TrainState state = build_model(effective.model, rc.seed, AdamWConfig{rc.lr, 0.9, 0.999, 1e-8, rc.weight_decay});
  const PreparedSplit train_split = prepare_split(*state.model, data.train);
  const PreparedSplit test_split = prepare_split(*state.model, data.test);

  std::ofstream metrics(dir / "metrics.txt", std::ios::trunc);
  std::ofstream timing(dir / "timing.txt", std::ios::trunc);
  if (!metrics || !timing) throw DataError("cannot write metrics in " + dir.string());
  TrainOptions opts{rc.epochs, rc.batch_size, rc.max_steps};
  train(state, train_split, test_split, opts, [&](const EpochMetrics& m) {
    std::ostringstream line;
    line << "epoch=" << m.epoch << " train_loss=" << format_double(m.train_loss)
         << " train_acc=" << format_double(m.train_accuracy) << " test_acc=" << format_double(m.test_accuracy);
    metrics << line.str() << '\n' << std::flush;
    timing << "epoch=" << m.epoch << " seconds=" << format_double(m.seconds) << '\n' << std::flush;
    out << line.str() << " seconds=" << std::fixed << std::setprecision(2) << m.seconds << std::defaultfloat << '\n';
  });
  save_checkpoint(*state.model, dir / "model.fav");
  out << "checkpoint=" << (dir / "model.fav").string() << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  const auto data = load_data(rc);
  Model model(data_model(rc, data), rc.seed);
  const std::string ckpt = rc.checkpoint.empty() ? (fs::path(rc.out) / "model.fav").string() : rc.checkpoint;
  load_checkpoint(model, ckpt);
  const PreparedSplit test_split = prepare_split(model, data.test);
  const double acc = evaluate(model, test_split.images, test_split.labels);
  out << "accuracy=" << format_double(acc) << " images=" << test_split.images.size() << '\n';
  return kExitOk;
}

int cmd_bench(const RunConfig& rc, std::ostream& out) {
  std::vector<ImageRGB> images;
  if (rc.format == "synthetic" || rc.dataset.empty()) {
    images = synthetic_halves(std::max<std::size_t>(rc.bench_images, 1), rc.model.image_height,
                              rc.model.image_width, 0.15, rc.seed)
                 .images;
  } else {
    RunConfig limited = rc;
    limited.test_limit = std::max<std::size_t>(rc.bench_images, 1);
    images = load_data(limited).test.images;
  }
  std::vector<BenchCase> cases;
  for (const auto& name : split(rc.variants, ',')) {
    if (name.empty()) continue;
    BenchCase c{name, rc.model};
    c.config.variant = parse_variant(name);
    cases.push_back(c);
  }
  if (cases.empty()) throw ConfigError("variants list is empty");
  BenchOptions opts;
  opts.repeats = rc.bench_repeats;
  opts.seed = rc.seed;
  const auto rows = benchmark_run(cases, images, opts);
  const std::string table = format_table(rows);
  const fs::path dir = ensure_out(rc);
  write_text(dir / "bench.txt", table);
  write_text(dir / "bench.records", format_records(rows));
  out << table;
  return kExitOk;
}

struct CheckLine {
  std::string module;
  GradCheckResult result;
};

std::vector<CheckLine> run_gradchecks(const RunConfig& rc) {
  std::vector<CheckLine> lines;
  GradCheckOptions opts;
  opts.seed = rc.seed + 7;

  {
    ParameterStore store;
    Initializer init(rc.seed);
    LinearLayer layer = init.linear(store, "proj", 6, 3);
    Tensor x = init.uniform({4, 6}, -1.0, 1.0);
    const std::vector<int> labels{0, 2, 1, 2};
    std::vector<Parameter*> ps{layer.weight, layer.bias};
    lines.push_back({"numerics.cross_entropy_linear",
                     gradient_check([&](Tape& t) { return cross_entropy(linear(t, t.constant(x), layer), labels); },
                                    ps, opts)});
  }
  {
    ParameterStore store;
    Initializer init(rc.seed + 1);
    const LlaConfig cfg{8, 2, 2, 4};
    LayerNormParams norm = init.layer_norm(store, "ln", cfg.model_dim);
    store.at("ln.gain").value() = init.uniform({cfg.model_dim}, 0.5, 1.5);
    store.at("ln.bias").value() = init.uniform({cfg.model_dim}, -0.5, 0.5);
    LatentCompressor comp = make_compressor(init, store, "c", cfg.latents, cfg.max_sequence, cfg.model_dim,
                                            LatentMode::token_mixing);
    AttentionProjections proj = make_attention(init, store, "attn", cfg.model_dim, cfg.heads);
    Tensor h = init.uniform({3, cfg.model_dim}, -1.0, 1.0);
    std::vector<Parameter*> ps;
    for (auto& p : store) ps.push_back(&p);
    lines.push_back({"lla.block", gradient_check(
                                      [&](Tape& t) {
                                        Var o = lla_forward(t, t.constant(h), cfg, norm, comp, proj).attention.output;
                                        return cross_entropy(o, std::vector<int>{1, 5});
                                      },
                                      ps, opts)});
  }
  const auto images = synthetic_halves(2, rc.model.image_height, rc.model.image_width, 0.15, rc.seed).images;
  for (Variant v : {Variant::baseline, Variant::sppp_lla}) {
    ModelConfig cfg = rc.model;
    cfg.variant = v;
    Model model(cfg, rc.seed);
    const PreparedImage input = model.prepare(images[1]);
    std::vector<Parameter*> ps;
    for (auto& p : model.parameters()) ps.push_back(&p);
    lines.push_back({"model." + std::string(to_string(v)),
                     gradient_check([&](Tape& t) { return cross_entropy(model.logits(t, input), std::vector<int>{1}); },
                                    ps, opts)});
  }
  return lines;
}

int cmd_gradcheck(const RunConfig& rc, std::ostream& out) {
  bool ok = true;
  for (const auto& line : run_gradchecks(rc)) {
    const bool pass = line.result.max_rel_error < rc.tolerance;
    ok = ok && pass;
    out << "module=" << line.module << " max_rel_err=" << std::scientific << std::setprecision(3)
        << line.result.max_rel_error << std::defaultfloat << " coords=" << line.result.coordinates
        << " worst=" << (line.result.worst_parameter.empty() ? "-" : line.result.worst_parameter)
        << " analytic=" << format_double(line.result.worst_analytic)
        << " numeric=" << format_double(line.result.worst_numeric) << " status=" << (pass ? "ok" : "FAIL") << '\n';
  }
  return ok ? kExitOk : kExitAcceptance;
}

int dispatch(const RunConfig& rc, std::ostream& out) {
  if (rc.command == "segment") return cmd_segment(rc, out);
  if (rc.command == "tokenize") return cmd_tokenize(rc, out);
  if (rc.command == "train") return cmd_train(rc, out);
  if (rc.command == "eval") return cmd_eval(rc, out);
  if (rc.command == "bench") return cmd_bench(rc, out);
  if (rc.command == "gradcheck") return cmd_gradcheck(rc, out);
  throw ConfigError("unknown command '" + rc.command + "'");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Focused-attention vision transformer: superpixel patch pooling, latent attention, cost accounting"};
  app.footer(kExitHelp);
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_file, preset, variant, out_dir, data_dir, format, checkpoint, variants;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, max_steps, image;
  std::optional<double> tolerance;
  app.add_option("--config", config_file, "flat key=value config file");
  app.add_option("--seed", seed, "random seed (u64)");
  app.add_option("--preset", preset, "model preset: desk | paper");
  app.add_option("--variant", variant, "baseline | sppp | lla | sppp+lla");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--data", data_dir, "dataset directory");
  app.add_option("--format", format, "cifar10 | fashion_mnist | synthetic");
  app.add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
  app.add_option("--variants", variants, "comma-separated variants for bench");
  app.add_option("--epochs", epochs, "training epochs");
  app.add_option("--max-steps", max_steps, "stop training after this many steps");
  app.add_option("--image", image, "test-split image index for segment/tokenize");
  app.add_option("--tolerance", tolerance, "gradcheck relative error bound");
  app.add_option("--set", overrides, "extra key=value setting (repeatable)");

  app.add_subcommand("segment", "SLIC label grid of one image -> <out>/segment.txt");
  app.add_subcommand("tokenize", "superpixel token report of one image -> <out>/tokens.txt");
  app.add_subcommand("train", "train; writes <out>/metrics.txt, timing.txt, run.cfg, model.fav");
  app.add_subcommand("eval", "test accuracy of a checkpoint");
  app.add_subcommand("bench", "cost table -> <out>/bench.txt and bench.records");
  app.add_subcommand("gradcheck", "gradient checks per module; exit 5 above tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    std::vector<std::pair<std::string, std::string>> entries;
    if (!config_file.empty()) {
      std::ifstream f(config_file);
      if (!f) throw ConfigError("cannot open config file " + config_file);
      std::stringstream ss;
      ss << f.rdbuf();
      entries = read_entries(ss.str());
    }
    entries.emplace_back("command", app.get_subcommands().front()->get_name());
    auto put = [&](const char* key, const std::string& v) {
      if (!v.empty()) entries.emplace_back(key, v);
    };
    put("preset", preset);
    put("variant", variant);
    put("out", out_dir);
    put("dataset", data_dir);
    put("format", format);
    put("checkpoint", checkpoint);
    put("variants", variants);
    if (seed) entries.emplace_back("seed", std::to_string(*seed));
    if (epochs) entries.emplace_back("epochs", std::to_string(*epochs));
    if (max_steps) entries.emplace_back("max_steps", std::to_string(*max_steps));
    if (image) entries.emplace_back("image", std::to_string(*image));
    if (tolerance) entries.emplace_back("tolerance", format_double(*tolerance));
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      entries.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const RunConfig rc = RunConfig::from_entries(entries);
    rc.model.validate();
    return dispatch(rc, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GeometryError& e) {
    err << "geometry error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const AccountingError& e) {
    err << "accounting error: " << e.what() << '\n';
    return kExitAcceptance;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUnexpected;
  }
}

}  // namespace fav
