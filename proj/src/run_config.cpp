#include <fstream>
#include <sstream>

#include "fav/cli.hpp"
#include "fav/error.hpp"
#include "fav/text.hpp"

namespace fav {

ModelConfig preset_config(std::string_view name) {
  if (name == "desk") return ModelConfig::desk();
  if (name == "paper") return ModelConfig::paper();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

std::vector<std::pair<std::string, std::string>> read_entries(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    out.emplace_back(std::string(trim(std::string_view(line).substr(0, eq))),
                     std::string(trim(std::string_view(line).substr(eq + 1))));
  }
  return out;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  auto size = [&](std::size_t& field) { field = std::size_t(parse_u64(value, key)); };
  if (key == "command") command = std::string(value);
  else if (key == "preset") {
    model = preset_config(value);
    preset = std::string(value);
  }
  else if (key == "dataset") dataset = std::string(value);
  else if (key == "format") {
    if (value != "cifar10" && value != "fashion_mnist" && value != "synthetic") {
      throw ConfigError("format: unknown value '" + std::string(value) + "' (expected cifar10, fashion_mnist or synthetic)");
    }
    format = std::string(value);
  }
  else if (key == "classes") {
    classes.clear();
    if (!trim(value).empty()) {
      for (const auto& c : split(value, ',')) classes.push_back(int(parse_u64(c, key)));
    }
  }
  else if (key == "train_limit") size(train_limit);
  else if (key == "test_limit") size(test_limit);
  else if (key == "seed") seed = parse_u64(value, key);
  else if (key == "out") out = std::string(value);
  else if (key == "epochs") size(epochs);
  else if (key == "batch_size") size(batch_size);
  else if (key == "max_steps") size(max_steps);
  else if (key == "lr") lr = parse_double(value, key);
  else if (key == "weight_decay") weight_decay = parse_double(value, key);
  else if (key == "checkpoint") checkpoint = std::string(value);
  else if (key == "variants") variants = std::string(value);
  else if (key == "bench_images") size(bench_images);
  else if (key == "bench_repeats") size(bench_repeats);
  else if (key == "image") size(image);
  else if (key == "tolerance") tolerance = parse_double(value, key);
  else if (!model.apply(key, value)) throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "command=" << command << '\n' << "preset=" << preset << '\n';
  os << model.serialize();
  std::string cls;
  for (std::size_t i = 0; i < classes.size(); ++i) cls += (i ? "," : "") + std::to_string(classes[i]);
  os << "dataset=" << dataset << '\n'
     << "format=" << format << '\n'
     << "classes=" << cls << '\n'
     << "train_limit=" << train_limit << '\n'
     << "test_limit=" << test_limit << '\n'
     << "seed=" << seed << '\n'
     << "out=" << out << '\n'
     << "epochs=" << epochs << '\n'
     << "batch_size=" << batch_size << '\n'
     << "max_steps=" << max_steps << '\n'
     << "lr=" << format_double(lr) << '\n'
     << "weight_decay=" << format_double(weight_decay) << '\n'
     << "checkpoint=" << checkpoint << '\n'
     << "variants=" << variants << '\n'
     << "bench_images=" << bench_images << '\n'
     << "bench_repeats=" << bench_repeats << '\n'
     << "image=" << image << '\n'
     << "tolerance=" << format_double(tolerance) << '\n';
  return os.str();
}

RunConfig RunConfig::from_entries(const std::vector<std::pair<std::string, std::string>>& entries) {
  RunConfig cfg;
  for (const auto& [k, v] : entries) {
    if (k == "preset") cfg.set(k, v);
  }
  for (const auto& [k, v] : entries) {
    if (k != "preset") cfg.set(k, v);
  }
  return cfg;
}

RunConfig RunConfig::parse(std::string_view text) { return from_entries(read_entries(text)); }

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

}  // namespace fav
