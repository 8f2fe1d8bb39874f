#include "clab/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace clab::nn {

namespace {

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double mish(double x) { return x * std::tanh(softplus(x)); }

double mish_grad(double x) {
  const double sp = softplus(x);
  const double t = std::tanh(sp);
  const double s = 1.0 / (1.0 + std::exp(-x));
  return t + x * s * (1.0 - t * t);
}

}  // namespace

const char* act_name(Act a) {
  switch (a) {
    case Act::Identity: return "identity";
    case Act::Mish: return "mish";
    case Act::Tanh: return "tanh";
  }
  return "identity";
}

Act act_from_name(const std::string& s) {
  if (s == "identity") return Act::Identity;
  if (s == "mish") return Act::Mish;
  if (s == "tanh") return Act::Tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

Matrix activate(Act a, const Matrix& z) {
  switch (a) {
    case Act::Identity: return z;
    case Act::Mish: return z.unaryExpr([](double v) { return mish(v); });
    case Act::Tanh: return z.array().tanh().matrix();
  }
  return z;
}

Matrix activate_grad(Act a, const Matrix& z) {
  switch (a) {
    case Act::Identity: return Matrix::Ones(z.rows(), z.cols());
    case Act::Mish: return z.unaryExpr([](double v) { return mish_grad(v); });
    case Act::Tanh: {
      Matrix t = z.array().tanh().matrix();
      return (1.0 - t.array().square()).matrix();
    }
  }
  return Matrix::Ones(z.rows(), z.cols());
}

Dense::Dense(int in, int out, Act a)
    : w(Matrix::Zero(out, in)), b(Vector::Zero(out)), act(a),
      gw(Matrix::Zero(out, in)), gb(Vector::Zero(out)) {}

void Dense::set_row_mask(Array mask) {
  if (mask.size() != w.rows()) throw std::invalid_argument("row mask size mismatch");
  row_mask = std::move(mask);
  sync_mask();
}

void Dense::clear_row_mask() {
  row_mask.resize(0);
  w_eff.resize(0, 0);
  b_eff.resize(0);
}

void Dense::sync_mask() {
  if (!masked()) return;
  w_eff = w.array().colwise() * row_mask;
  b_eff = (b.array() * row_mask).matrix();
}

void Dense::zero_grad() {
  gw.setZero();
  gb.setZero();
}

Mlp::Mlp(const std::vector<int>& widths, const std::vector<Act>& acts) {
  if (widths.size() < 2 || acts.size() != widths.size() - 1)
    throw std::invalid_argument("Mlp: widths/acts mismatch");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers.emplace_back(widths[i], widths[i + 1], acts[i]);
}

Matrix Mlp::forward(const Matrix& x, Tape* tape) const {
  if (x.rows() != in_dim()) throw std::invalid_argument("Mlp::forward: input dim mismatch");
  if (tape) {
    tape->x.clear();
    tape->z.clear();
  }
  Matrix cur = x;
  for (const auto& layer : layers) {
    Matrix z = layer.weights() * cur;
    z.colwise() += layer.bias();
    if (tape) {
      tape->x.push_back(std::move(cur));
      tape->z.push_back(z);
    }
    cur = activate(layer.act, z);
  }
  return cur;
}

Matrix Mlp::backward(const Tape& tape, const Matrix& dy) {
  if (tape.z.size() != layers.size())
    throw std::invalid_argument("Mlp::backward: tape does not match network");
  Matrix d = dy;
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    Dense& layer = layers[static_cast<std::size_t>(l)];
    Matrix dz = d.cwiseProduct(activate_grad(layer.act, tape.z[l]));
    if (layer.masked()) dz.array().colwise() *= layer.row_mask;
    layer.gw.noalias() += dz * tape.x[l].transpose();
    layer.gb.noalias() += dz.rowwise().sum();
    d.noalias() = layer.weights().transpose() * dz;
  }
  return d;
}

void Mlp::zero_grad() {
  for (auto& l : layers) l.zero_grad();
}

void Mlp::init_glorot(std::mt19937_64& rng, double final_layer_scale) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Dense& l = layers[i];
    const double limit = std::sqrt(6.0 / (l.in_dim() + l.out_dim()));
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (int r = 0; r < l.w.rows(); ++r)
      for (int c = 0; c < l.w.cols(); ++c) l.w(r, c) = uni(rng);
    l.b.setZero();
    if (i + 1 == layers.size()) l.w *= final_layer_scale;
    l.sync_mask();
  }
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.w.size() + l.b.size());
  return n;
}

bool Mlp::finite() const {
  for (const auto& l : layers)
    if (!l.w.allFinite() || !l.b.allFinite()) return false;
  return true;
}

void soft_update(const Mlp& online, Mlp& target, double tau) {
  if (online.layers.size() != target.layers.size())
    throw std::invalid_argument("soft_update: layer count mismatch");
  for (std::size_t i = 0; i < online.layers.size(); ++i) {
    const Dense& src = online.layers[i];
    Dense& dst = target.layers[i];
    if (src.w.rows() != dst.w.rows() || src.w.cols() != dst.w.cols())
      throw std::invalid_argument("soft_update: shape mismatch");
    dst.w = tau * src.w + (1.0 - tau) * dst.w;
    dst.b = tau * src.b + (1.0 - tau) * dst.b;
    dst.sync_mask();
  }
}

void Adam::step(Mlp& net) {
  if (mw.empty()) {
    for (const auto& l : net.layers) {
      mw.emplace_back(Matrix::Zero(l.w.rows(), l.w.cols()));
      vw.emplace_back(Matrix::Zero(l.w.rows(), l.w.cols()));
      mb.emplace_back(Vector::Zero(l.b.size()));
      vb.emplace_back(Vector::Zero(l.b.size()));
    }
  }
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Dense& l = net.layers[i];
    mw[i] = beta1 * mw[i] + (1.0 - beta1) * l.gw;
    vw[i] = beta2 * vw[i] + (1.0 - beta2) * l.gw.cwiseProduct(l.gw);
    mb[i] = beta1 * mb[i] + (1.0 - beta1) * l.gb;
    vb[i] = beta2 * vb[i] + (1.0 - beta2) * l.gb.cwiseProduct(l.gb);
    Matrix dw = (mw[i].array() / c1) / ((vw[i].array() / c2).sqrt() + eps) * lr;
    Vector db = ((mb[i].array() / c1) / ((vb[i].array() / c2).sqrt() + eps) * lr).matrix();
    if (weight_decay != 0.0) dw += lr * weight_decay * l.w;
    if (l.masked()) {
      dw.array().colwise() *= l.row_mask;
      db.array() *= l.row_mask;
    }
    l.w -= dw;
    l.b -= db;
    l.sync_mask();
  }
}

Vector sinusoidal_embed(int step, int width) {
  if (width < 2 || width % 2 != 0)
    throw std::invalid_argument("sinusoidal_embed: width must be even and >= 2");
  if (step < 0) throw std::invalid_argument("sinusoidal_embed: step must be >= 0");
  const int half = width / 2;
  Vector out(width);
  for (int i = 0; i < half; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * static_cast<double>(i) / std::max(half - 1, 1));
    out[2 * i] = std::sin(step * freq);
    out[2 * i + 1] = std::cos(step * freq);
  }
  return out;
}

void save_mlp(std::ostream& os, const Mlp& net, const std::string& name) {
  os << "mlp " << name << " layers=" << net.layers.size() << "\n";
  const auto old_flags = os.flags();
  os << std::hexfloat;
  for (const auto& l : net.layers) {
    os << "layer in=" << l.in_dim() << " out=" << l.out_dim() << " act=" << act_name(l.act)
       << "\n";
    for (int r = 0; r < l.w.rows(); ++r) {
      for (int c = 0; c < l.w.cols(); ++c) os << (c ? " " : "") << l.w(r, c);
      os << "\n";
    }
    for (int r = 0; r < l.b.size(); ++r) os << (r ? " " : "") << l.b[r];
    os << "\n";
  }
  os.flags(old_flags);
}

Mlp load_mlp(std::istream& is, std::string* name) {
  std::string tag, net_name, layers_tok;
  is >> tag >> net_name >> layers_tok;
  if (tag != "mlp" || layers_tok.rfind("layers=", 0) != 0)
    throw std::runtime_error("load_mlp: malformed header");
  if (name) *name = net_name;
  const int n_layers = std::stoi(layers_tok.substr(7));
  Mlp net;
  for (int i = 0; i < n_layers; ++i) {
    std::string ltag, in_tok, out_tok, act_tok;
    is >> ltag >> in_tok >> out_tok >> act_tok;
    if (ltag != "layer") throw std::runtime_error("load_mlp: malformed layer header");
    const int in = std::stoi(in_tok.substr(3));
    const int out = std::stoi(out_tok.substr(4));
    Dense layer(in, out, act_from_name(act_tok.substr(4)));
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) {
        std::string tok;
        is >> tok;
        layer.w(r, c) = std::strtod(tok.c_str(), nullptr);
      }
    for (int r = 0; r < out; ++r) {
      std::string tok;
      is >> tok;
      layer.b[r] = std::strtod(tok.c_str(), nullptr);
    }
    net.layers.push_back(std::move(layer));
  }
  if (!is) throw std::runtime_error("load_mlp: truncated stream");
  return net;
}

}  // namespace clab::nn
