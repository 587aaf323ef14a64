#pragma once

// Network, loss and protocol settings. JSON keys mirror the field names.

#include <json.hpp>

#include "rgk/core/error.hpp"

namespace rgk {

struct ModelConfig {
  // Object patch layout and region size.
  std::size_t G = 128;
  std::size_t S = 32;
  std::size_t N = 2048;
  std::size_t R = 16;
  // Hand patch layout used by the geometric attention blocks.
  std::size_t G_h = 32;
  std::size_t S_h = 24;

  std::size_t d = 256;    // token width
  std::size_t d_c = 256;  // condition vector
  std::size_t d_h = 512;  // interaction feature
  std::size_t d_z = 64;   // latent
  std::size_t embed_width = 128;  // hidden width of the patch point MLP
  std::size_t ffn_ratio = 4;
  std::size_t heads = 4;
  std::size_t knn_k = 8;
  std::size_t B_o = 6;
  std::size_t B_h = 3;
  std::size_t B_hoi = 3;
  std::size_t B_dec = 2;

  // Geometry enters the networks multiplied by this factor (meters -> dm).
  double coord_scale = 10.0;

  double lambda_v = 1.0;
  double lambda_e = 1.0;
  double lambda_kld = 5e-3;
  double mask_ratio = 0.6;

  double lr = 5e-4;
  double weight_decay = 0.05;

  // Evaluation protocol.
  std::size_t samples_per_region = 20;
  std::size_t region_groups = 5;

  // false replaces the condition mask with all ones (ablation).
  bool use_condition_mask = true;

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw UsageError(std::string("config: ") + what);
    };
    need(G >= 1 && S >= 1 && N >= 1 && G_h >= 1 && S_h >= 1, "patch counts and sizes must be >= 1");
    need(G <= N && S <= N, "G and S must not exceed N");
    need(R >= 1 && R <= G, "R must lie in [1, G]");
    need(S_h <= 778 && G_h <= 778, "hand patch layout exceeds 778 vertices");
    need(d >= 1 && d_c >= 1 && d_h >= 1 && d_z >= 1 && embed_width >= 1 && ffn_ratio >= 1, "widths must be >= 1");
    need(heads >= 1 && d % heads == 0, "d must be divisible by heads");
    need(knn_k >= 1 && knn_k <= G_h, "knn_k must lie in [1, G_h]");
    need(B_dec >= 1, "B_dec must be >= 1");
    need(coord_scale > 0, "coord_scale must be > 0");
    need(lambda_v >= 0 && lambda_e >= 0 && lambda_kld >= 0, "loss weights must be >= 0");
    need(mask_ratio > 0 && mask_ratio < 1, "mask_ratio must lie in (0, 1)");
    need(lr > 0 && weight_decay >= 0, "lr must be > 0 and weight_decay >= 0");
    need(samples_per_region >= 1 && region_groups >= 1, "evaluation counts must be >= 1");
  }

  // Small widths for tests and desk-scale runs.
  static ModelConfig toy() {
    ModelConfig c;
    c.G = 8;
    c.S = 4;
    c.N = 64;
    c.R = 2;
    c.G_h = 8;
    c.S_h = 4;
    c.d = 16;
    c.d_c = 16;
    c.d_h = 16;
    c.d_z = 4;
    c.embed_width = 8;
    c.ffn_ratio = 2;
    c.heads = 2;
    c.knn_k = 3;
    c.B_o = 1;
    c.B_h = 1;
    c.B_hoi = 1;
    c.B_dec = 1;
    return c;
  }

  // Toy widths on a denser patch layout (R/G = 12.5% as in the defaults);
  // used for the desk-scale pretraining and conditioning runs.
  static ModelConfig desk() {
    ModelConfig c = toy();
    c.G = 32;
    c.S = 16;
    c.N = 512;
    c.R = 4;
    c.d = 32;
    c.d_c = 32;
    c.d_h = 32;
    return c;
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, G, S, N, R, G_h, S_h, d, d_c, d_h, d_z, embed_width,
                                                ffn_ratio, heads, knn_k, B_o, B_h, B_hoi, B_dec, coord_scale, lambda_v,
                                                lambda_e, lambda_kld, mask_ratio, lr, weight_decay, samples_per_region,
                                                region_groups, use_condition_mask)

// Applies keys from j over base; unknown keys are rejected.
inline ModelConfig merge_config(const ModelConfig& base, const nlohmann::json& j) {
  nlohmann::json merged = base;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!merged.contains(it.key())) throw UsageError("config: unknown key '" + it.key() + "'");
    merged[it.key()] = it.value();
  }
  try {
    return merged.get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

}  // namespace rgk
