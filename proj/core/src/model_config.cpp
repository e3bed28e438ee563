#include <fstream>

#include <json.hpp>

#include "aff/model.hpp"

namespace aff {

using nlohmann::json;

void ModelConfig::validate() const {
  check(!stages.empty(), "ModelConfig: no stages");
  int prev_dim = 0;
  for (const StageConfig& s : stages) {
    check(s.blocks >= 0, "ModelConfig: negative block count");
    check(s.dim >= 1 && s.heads >= 1 && s.dim % s.heads == 0,
          "ModelConfig: head count must divide dim");
    check(s.cluster_size >= 1, "ModelConfig: cluster size must be >= 1");
    check(s.neighborhood_size % s.cluster_size == 0,
          "ModelConfig: neighborhood size must be divisible by cluster size");
    check(s.dim >= prev_dim, "ModelConfig: channel dims must be nondecreasing");
    prev_dim = s.dim;
  }
  check(keep_fraction > 0.0 && keep_fraction <= 1.0, "ModelConfig: keep_fraction in (0,1]");
  check(alpha >= 0.0, "ModelConfig: alpha must be >= 0");
  check(num_classes >= 2, "ModelConfig: need at least 2 classes");
}

ModelConfig ModelConfig::aff_nano() {
  ModelConfig c;
  c.stages = {{1, 16, 1, 2, 8, 24}, {1, 32, 2, 2, 8, 24}, {2, 64, 4, 2, 8, 24}, {1, 96, 8, 2, 8, 24}};
  return c;
}

ModelConfig ModelConfig::aff_mini() {
  ModelConfig c;
  c.stages = {{2, 32, 2, 2, 8, 48}, {2, 128, 4, 2, 8, 48}, {6, 256, 8, 2, 8, 48}, {2, 384, 16, 2, 8, 48}};
  return c;
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig c;
  if (j.contains("preset")) {
    const std::string p = j.at("preset").get<std::string>();
    if (p == "aff-nano") c = aff_nano();
    else if (p == "aff-mini") c = aff_mini();
    else throw std::invalid_argument("ModelConfig: unknown preset " + p);
  }
  if (j.contains("stages")) {
    c.stages.clear();
    for (const json& js : j.at("stages")) {
      StageConfig s;
      s.blocks = js.at("blocks").get<int>();
      s.dim = js.at("dim").get<int>();
      s.heads = js.at("heads").get<int>();
      s.mlp_ratio = js.value("mlp_ratio", 2);
      s.cluster_size = js.value("cluster_size", 8);
      s.neighborhood_size = js.value("neighborhood_size", 48);
      c.stages.push_back(s);
    }
  }
  c.keep_fraction = j.value("keep_fraction", c.keep_fraction);
  c.alpha = j.value("alpha", c.alpha);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.in_channels = j.value("in_channels", c.in_channels);
  c.global_last_stage_max_tokens = j.value("global_last_stage_max_tokens", c.global_last_stage_max_tokens);
  if (j.contains("curve")) c.curve = curve_from_string(j.at("curve").get<std::string>());
  c.validate();
  return c;
}

ModelConfig ModelConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "ModelConfig: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

std::string ModelConfig::to_json() const {
  json j;
  j["stages"] = json::array();
  for (const StageConfig& s : stages)
    j["stages"].push_back({{"blocks", s.blocks},
                           {"dim", s.dim},
                           {"heads", s.heads},
                           {"mlp_ratio", s.mlp_ratio},
                           {"cluster_size", s.cluster_size},
                           {"neighborhood_size", s.neighborhood_size}});
  j["keep_fraction"] = keep_fraction;
  j["alpha"] = alpha;
  j["num_classes"] = num_classes;
  j["in_channels"] = in_channels;
  j["global_last_stage_max_tokens"] = global_last_stage_max_tokens;
  j["curve"] = to_string(curve);
  return j.dump(2);
}

}  // namespace aff
