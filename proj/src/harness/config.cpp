#include "loi/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/core.h>

namespace loi::harness {

using nlohmann::json;

ExperimentKind parse_experiment_kind(const std::string& name) {
  if (name == "fig3_1d") return ExperimentKind::fig3_1d;
  if (name == "fig4_tonal") return ExperimentKind::fig4_tonal;
  if (name == "fig5_noise") return ExperimentKind::fig5_noise;
  if (name == "disk_benchmark") return ExperimentKind::disk_benchmark;
  if (name == "custom") return ExperimentKind::custom;
  throw Error(fmt::format("unknown experiment '{}'", name));
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::fig3_1d: return "fig3_1d";
    case ExperimentKind::fig4_tonal: return "fig4_tonal";
    case ExperimentKind::fig5_noise: return "fig5_noise";
    case ExperimentKind::disk_benchmark: return "disk_benchmark";
    case ExperimentKind::custom: return "custom";
  }
  return "?";
}

Ablation parse_ablation(const std::string& name) {
  if (name == "none") return Ablation::none;
  if (name == "beta_only") return Ablation::beta_only;
  if (name == "no_extent") return Ablation::no_extent;
  throw Error(fmt::format("unknown ablation '{}' (expected none, beta_only or no_extent)", name));
}

std::string to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::none: return "none";
    case Ablation::beta_only: return "beta_only";
    case Ablation::no_extent: return "no_extent";
  }
  return "?";
}

ScaleConfig ExperimentConfig::effective_scales() const {
  ScaleConfig s = scales;
  if (ablation == Ablation::beta_only) {
    s.sigmas = {0.0};
    s.alphas = {0.0};
  } else if (ablation == Ablation::no_extent) {
    s.alphas = {0.0};
  }
  return s;
}

void ExperimentConfig::validate() const {
  if (width < 1 || height < 1) {
    throw Error(fmt::format("config: image size {}x{} must be positive", width, height));
  }
  if (seeds.empty()) throw Error("config: seeds must not be empty");
  if (methods.empty()) throw Error("config: methods must not be empty");
  std::set<LossKind> unique(methods.begin(), methods.end());
  if (unique.size() != methods.size()) throw Error("config: methods listed twice");
  if (!(noise_stddev >= 0.0)) throw Error("config: noise_stddev must be >= 0");
  if (optimizer.max_iters < 0) throw Error("config: optimizer.max_iters must be >= 0");
  if (!(optimizer.lr > 0.0)) throw Error("config: optimizer.lr must be > 0");
  if (!(optimizer.final_lr_factor > 0.0)) {
    throw Error("config: optimizer.final_lr_factor must be > 0");
  }
  if (optimizer.source == GradientSource::smoothed &&
      (optimizer.smoothing_samples < 2 || !(optimizer.smoothing_stddev > 0.0))) {
    throw Error("config: smoothed gradients need samples >= 2 and stddev > 0");
  }
  effective_scales().validate();
  switch (kind) {
    case ExperimentKind::disk_benchmark:
      if (std::find(kBenchmarkCounts.begin(), kBenchmarkCounts.end(), n) ==
          kBenchmarkCounts.end()) {
        throw Error(fmt::format("config: disk_benchmark n = {} (allowed: 4, 16, 32, 64, 256)", n));
      }
      break;
    case ExperimentKind::fig3_1d:
    case ExperimentKind::fig4_tonal:
    case ExperimentKind::fig5_noise:
      if (height != 1 || width < 128) {
        throw Error(fmt::format("config: {} is a 1D scene and needs height 1, width >= 128",
                                to_string(kind)));
      }
      break;
    case ExperimentKind::custom:
      if (!scene) throw Error("config: custom experiments need a scene");
      scene->validate();
      if (initial) {
        initial->validate();
        if (initial->disks.size() != scene->disks.size() ||
            initial->channels() != scene->channels()) {
          throw Error("config: initial scene must match the target's disks and channels");
        }
      }
      break;
  }
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.output_dir = std::filesystem::path("out") / to_string(kind);
  switch (kind) {
    case ExperimentKind::fig3_1d:
    case ExperimentKind::fig4_tonal:
    case ExperimentKind::fig5_noise:
      c.width = 128;
      c.height = 1;
      c.optimizer.max_iters = 2000;
      c.optimizer.final_lr_factor = 0.01;
      break;
    case ExperimentKind::disk_benchmark:
    case ExperimentKind::custom:
      break;
  }
  switch (kind) {
    case ExperimentKind::fig3_1d: c.methods = {LossKind::loi, LossKind::mse}; break;
    case ExperimentKind::fig4_tonal: c.methods = {LossKind::loi, LossKind::gp}; break;
    case ExperimentKind::fig5_noise:
      c.methods = {LossKind::loi, LossKind::mse, LossKind::gp};
      c.noise_stddev = 0.1;
      c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
      break;
    case ExperimentKind::disk_benchmark:
      c.methods = {LossKind::loi, LossKind::gp};
      c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
      c.optimizer.max_iters = 200;
      c.optimizer.final_lr_factor = 0.1;
      break;
    case ExperimentKind::custom: break;
  }
  return c;
}

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(fmt::format("config: {} must be an object", where));
  for (const auto& item : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return item.key() == k; }) == allowed.end()) {
      throw Error(fmt::format("config: unknown key '{}' in {}", item.key(), where));
    }
  }
}

std::vector<std::uint64_t> parse_seeds(const json& j) {
  // A bare count n means seeds 0..n-1.
  if (j.is_number_integer()) {
    const auto count = j.get<std::int64_t>();
    if (count < 1) throw Error("config: seed count must be positive");
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
    return seeds;
  }
  return j.get<std::vector<std::uint64_t>>();
}

}  // namespace

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "config",
             {"schema", "experiment", "width", "height", "n", "seeds", "methods", "scales",
              "ablation", "optimizer", "noise_stddev", "output_dir", "scene", "initial",
              "params"});
  if (!j.contains("schema")) throw Error("config: missing \"schema\"");
  const int schema = j.at("schema").get<int>();
  if (schema != kSchemaVersion) {
    throw Error(fmt::format("config: schema {} is not supported (expected {})", schema,
                            kSchemaVersion));
  }
  if (!j.contains("experiment")) throw Error("config: missing \"experiment\"");
  ExperimentConfig c = default_config(parse_experiment_kind(j.at("experiment").get<std::string>()));

  read_if(j, "width", c.width);
  read_if(j, "height", c.height);
  read_if(j, "n", c.n);
  if (j.contains("seeds")) c.seeds = parse_seeds(j.at("seeds"));
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_loss_kind(m.get<std::string>()));
  }
  if (j.contains("scales")) {
    const json& s = j.at("scales");
    check_keys(s, "scales", {"sigmas", "alphas", "betas", "beta"});
    read_if(s, "sigmas", c.scales.sigmas);
    read_if(s, "alphas", c.scales.alphas);
    read_if(s, "betas", c.scales.betas);
    if (s.contains("beta")) c.scales.betas = {s.at("beta").get<double>()};
  }
  if (j.contains("ablation")) c.ablation = parse_ablation(j.at("ablation").get<std::string>());
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, "optimizer",
               {"lr", "max_iters", "stop_grad_norm", "final_lr_factor", "gradient",
                "smoothing_stddev", "smoothing_samples"});
    read_if(o, "lr", c.optimizer.lr);
    read_if(o, "max_iters", c.optimizer.max_iters);
    read_if(o, "stop_grad_norm", c.optimizer.stop_grad_norm);
    read_if(o, "final_lr_factor", c.optimizer.final_lr_factor);
    read_if(o, "smoothing_stddev", c.optimizer.smoothing_stddev);
    read_if(o, "smoothing_samples", c.optimizer.smoothing_samples);
    if (o.contains("gradient")) {
      const auto g = o.at("gradient").get<std::string>();
      if (g == "analytic") {
        c.optimizer.source = GradientSource::analytic;
      } else if (g == "smoothed") {
        c.optimizer.source = GradientSource::smoothed;
      } else {
        throw Error(fmt::format("config: unknown gradient source '{}'", g));
      }
    }
  }
  read_if(j, "noise_stddev", c.noise_stddev);
  if (j.contains("output_dir")) {
    std::filesystem::path p = j.at("output_dir").get<std::string>();
    c.output_dir = p.is_absolute() ? p : base_dir / p;
  } else {
    c.output_dir = base_dir / c.output_dir;
  }
  if (j.contains("scene")) c.scene = j.at("scene").get<DiskScene>();
  if (j.contains("initial")) c.initial = j.at("initial").get<DiskScene>();
  if (j.contains("params")) {
    const json& p = j.at("params");
    check_keys(p, "params", {"center_x", "center_y", "radius", "color"});
    read_if(p, "center_x", c.params.center_x);
    read_if(p, "center_y", c.params.center_y);
    read_if(p, "radius", c.params.radius);
    read_if(p, "color", c.params.color);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open config '{}'", path.string()));
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(fmt::format("config '{}': {}", path.string(), e.what()));
  }
  try {
    return parse_config(j, path.parent_path());
  } catch (const json::exception& e) {
    throw Error(fmt::format("config '{}': {}", path.string(), e.what()));
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = kSchemaVersion;
  j["experiment"] = to_string(c.kind);
  j["width"] = c.width;
  j["height"] = c.height;
  if (c.kind == ExperimentKind::disk_benchmark) j["n"] = c.n;
  j["seeds"] = c.seeds;
  json methods = json::array();
  for (LossKind m : c.methods) methods.push_back(loi::to_string(m));
  j["methods"] = methods;
  j["scales"] = {{"sigmas", c.scales.sigmas}, {"alphas", c.scales.alphas},
                 {"betas", c.scales.betas}};
  j["ablation"] = to_string(c.ablation);
  j["optimizer"] = {
      {"lr", c.optimizer.lr},
      {"max_iters", c.optimizer.max_iters},
      {"stop_grad_norm", c.optimizer.stop_grad_norm},
      {"final_lr_factor", c.optimizer.final_lr_factor},
      {"gradient", c.optimizer.source == GradientSource::smoothed ? "smoothed" : "analytic"},
      {"smoothing_stddev", c.optimizer.smoothing_stddev},
      {"smoothing_samples", c.optimizer.smoothing_samples}};
  j["noise_stddev"] = c.noise_stddev;
  j["output_dir"] = c.output_dir.generic_string();
  if (c.scene) j["scene"] = *c.scene;
  if (c.initial) j["initial"] = *c.initial;
  j["params"] = {{"center_x", c.params.center_x}, {"center_y", c.params.center_y},
                 {"radius", c.params.radius}, {"color", c.params.color}};
  return j;
}

}  // namespace loi::harness
