#include "clab/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace clab {

Vector row_importance(const Matrix& w) {
  Vector imp(w.rows());
  for (int r = 0; r < w.rows(); ++r) imp[r] = w.row(r).norm();
  return imp;
}

MaskSet build_masks(const Denoiser& net, double rate) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("build_masks: rate must lie in [0, 1)");
  MaskSet out;
  out.rate = rate;
  for (const nn::Dense* layer : net.prunable_layers()) {
    const int rows = layer->out_dim();
    const int n_prune = static_cast<int>(std::ceil(rate * rows));
    nn::Array mask = nn::Array::Ones(rows);
    if (n_prune > 0) {
      const Vector imp = row_importance(layer->w);
      std::vector<int> order(rows);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return imp[a] < imp[b]; });
      for (int i = 0; i < n_prune; ++i) mask[order[i]] = 0.0;
    }
    out.rows.push_back(std::move(mask));
  }
  return out;
}

void apply_masks(Denoiser& net, const MaskSet& masks) {
  auto layers = net.prunable_layers();
  if (masks.rows.size() != layers.size())
    throw std::invalid_argument("apply_masks: mask/layer count mismatch");
  if (masks.rate == 0.0) {
    clear_masks(net);
    return;
  }
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i]->set_row_mask(masks.rows[i]);
}

void clear_masks(Denoiser& net) {
  for (nn::Dense* layer : net.prunable_layers()) layer->clear_row_mask();
}

double masked_fraction(const Denoiser& net) {
  double masked = 0.0, total = 0.0;
  for (const nn::Dense* layer : net.prunable_layers()) {
    total += layer->out_dim();
    if (layer->masked()) masked += (1.0 - layer->row_mask).sum();
  }
  return total > 0.0 ? masked / total : 0.0;
}

Denoiser compact_export(const Denoiser& net, const MaskSet& masks) {
  auto prunable = net.prunable_layers();
  if (masks.rows.size() != prunable.size())
    throw std::invalid_argument("compact_export: mask/layer count mismatch");

  Denoiser out;
  out.action_dim = net.action_dim;
  out.state_dim = net.state_dim;
  out.emb_width = net.emb_width;
  out.time_mlp = net.time_mlp;

  // Kept-row index per trunk layer; non-prunable layers keep everything.
  const std::size_t n_layers = net.trunk.layers.size();
  std::vector<std::vector<int>> keep(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int rows = net.trunk.layers[l].out_dim();
    if (l < prunable.size()) {
      for (int r = 0; r < rows; ++r)
        if (masks.rows[l][r] != 0.0) keep[l].push_back(r);
    } else {
      keep[l].resize(rows);
      std::iota(keep[l].begin(), keep[l].end(), 0);
    }
  }

  out.trunk.layers.clear();
  std::vector<int> in_keep(net.trunk.layers.front().in_dim());
  std::iota(in_keep.begin(), in_keep.end(), 0);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const nn::Dense& src = net.trunk.layers[l];
    nn::Dense dst(static_cast<int>(in_keep.size()), static_cast<int>(keep[l].size()),
                  src.act);
    for (std::size_t r = 0; r < keep[l].size(); ++r) {
      for (std::size_t c = 0; c < in_keep.size(); ++c)
        dst.w(static_cast<int>(r), static_cast<int>(c)) = src.w(keep[l][r], in_keep[c]);
      dst.b[static_cast<int>(r)] = src.b[keep[l][r]];
    }
    out.trunk.layers.push_back(std::move(dst));
    in_keep = keep[l];
  }
  return out;
}

}  // namespace clab
