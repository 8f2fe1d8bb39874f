#pragma once

#include "clab/diffusion.hpp"

namespace clab {

/// Binary row masks for the prunable layers of a denoiser, in layer order.
struct MaskSet {
  double rate = 0.0;
  std::vector<nn::Array> rows;
};

/// Euclidean norm of each row of a parameter block.
Vector row_importance(const Matrix& w);

/// Mask the ceil(rate * rows) lowest-importance rows of every prunable layer;
/// ties keep the lower index. Importance is measured on the dense parameters,
/// so previously masked rows compete again on every call.
MaskSet build_masks(const Denoiser& net, double rate);

/// Install the masks (rate zero clears them). Masked rows produce zero
/// activations and receive zero gradient and zero update.
void apply_masks(Denoiser& net, const MaskSet& masks);

void clear_masks(Denoiser& net);

/// Fraction of prunable rows currently masked out.
double masked_fraction(const Denoiser& net);

/// Physically remove masked rows and the matching downstream columns,
/// yielding a smaller network with the same input-output behaviour as the
/// masked-dense one.
Denoiser compact_export(const Denoiser& net, const MaskSet& masks);

}  // namespace clab
