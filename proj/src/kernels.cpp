#include "salgp/kernels.hpp"

namespace salgp {

BaseKind parse_base_kind(const std::string& name) {
  if (name == "rbf") return BaseKind::rbf;
  if (name == "matern25" || name == "matern52" || name == "matern") return BaseKind::matern52;
  throw ArgumentError("unknown base kernel '" + name + "' (expected rbf or matern25)");
}

std::string to_string(BaseKind kind) { return kind == BaseKind::rbf ? "rbf" : "matern25"; }

KernelVariant parse_variant(const std::string& name) {
  if (name == "single_sum") return KernelVariant::single_sum;
  if (name == "hierarchical_layer") return KernelVariant::hierarchical_layer;
  if (name == "icm_full") return KernelVariant::icm_full;
  if (name == "multilayer_additive") return KernelVariant::multilayer_additive;
  throw ArgumentError("unknown kernel variant '" + name + "'");
}

std::string to_string(KernelVariant variant) {
  switch (variant) {
    case KernelVariant::single_sum: return "single_sum";
    case KernelVariant::hierarchical_layer: return "hierarchical_layer";
    case KernelVariant::icm_full: return "icm_full";
    case KernelVariant::multilayer_additive: return "multilayer_additive";
  }
  return "?";
}

std::vector<std::string> parameter_names(const KernelSpec& spec) {
  const auto lay = ParameterLayout::of(spec);
  std::vector<std::string> names(static_cast<std::size_t>(lay.total()));
  auto sum_names = [&](int at, const std::string& prefix) {
    names[static_cast<std::size_t>(at)] = prefix + "log_feat_variance";
    names[static_cast<std::size_t>(at + 1)] = prefix + "log_feat_lengthscale";
    names[static_cast<std::size_t>(at + 2)] = prefix + "log_conf_variance";
    names[static_cast<std::size_t>(at + 3)] = prefix + "log_conf_lengthscale";
  };
  const int l = spec.layer_count();
  sum_names(lay.base, spec.variant == KernelVariant::hierarchical_layer ? "global." : "");
  if (lay.layer >= 0) sum_names(lay.layer, "layer.");
  if (lay.alpha >= 0) {
    names[static_cast<std::size_t>(lay.alpha)] = "log_global_weight";
    for (int i = 0; i < l; ++i)
      names[static_cast<std::size_t>(lay.beta + i)] =
          "log_layer_variance[" + std::to_string(spec.layers[static_cast<std::size_t>(i)]) + "]";
  }
  if (lay.icm_factor >= 0) {
    for (int c = 0; c < spec.icm_rank; ++c)
      for (int r = 0; r < l; ++r)
        names[static_cast<std::size_t>(lay.icm_factor + r + c * l)] =
            "icm_factor[" + std::to_string(r) + "," + std::to_string(c) + "]";
    for (int i = 0; i < l; ++i)
      names[static_cast<std::size_t>(lay.icm_diag + i)] = "icm_diag_raw[" + std::to_string(i) + "]";
  }
  names[static_cast<std::size_t>(lay.noise)] = "log_noise";
  return names;
}

}  // namespace salgp
