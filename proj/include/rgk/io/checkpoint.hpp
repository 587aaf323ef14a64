#pragma once

// Model checkpoints: a container whose config snapshot records the kind
// ("cvae" or "mae") and the ModelConfig the weights were built with.

#include "rgk/model/network.hpp"
#include "rgk/pretrain/mae.hpp"

namespace rgk {

struct Checkpoint {
  std::string kind;
  ModelConfig config;
  ParamStore params;
  std::uint64_t rng_digest = 0;

  Container container() const {
    Container ck;
    ck.config = nlohmann::json{{"kind", kind}, {"model", config}}.dump();
    ck.rng_digest = rng_digest;
    params.store(ck);
    return ck;
  }
};

inline Checkpoint make_checkpoint(ParamStore P, const ModelConfig& c, const std::string& kind, std::uint64_t seed) {
  return {kind, c, std::move(P), stream_seed(seed, "digest")};
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& kind) {
  Container ck = Container::load(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ck.config);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed config snapshot: " + e.what());
  }
  if (!meta.contains("kind") || meta["kind"] != kind)
    throw DataError(path.string() + ": not a " + kind + " checkpoint");
  ModelConfig c;
  try {
    c = meta.at("model").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad model config: " + e.what());
  }
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  ParamStore P = kind == "cvae" ? init_cvae(c, 0) : init_mae(c, 0);
  P.load(ck);
  if (ck.entries().size() != P.size()) throw DataError(path.string() + ": unexpected extra entries");
  return {kind, c, std::move(P), ck.rng_digest};
}

}  // namespace rgk
