#include "fuzzyjoin/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fuzzyjoin/error.hpp"

namespace fuzzyjoin {

namespace {

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// out += M v, M is rows x v.size() row-major
void gemv_add(std::span<const double> m, std::span<const double> v,
              std::span<double> out) {
  const std::size_t cols = v.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* row = m.data() + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * v[j];
    out[i] += acc;
  }
}

// out += Mᵀ g
void gemv_t_add(std::span<const double> m, std::span<const double> g,
                std::span<double> out) {
  const std::size_t cols = out.size();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    const double* row = m.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * gi;
  }
}

// M += g vᵀ
void outer_add(std::span<double> m, std::span<const double> g,
               std::span<const double> v) {
  const std::size_t cols = v.size();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    double* row = m.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += gi * v[j];
  }
}

void check_shape(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

}  // namespace

GruLayerParams::GruLayerParams(std::size_t input_dim, std::size_t hidden_dim)
    : input_dim_(input_dim),
      hidden_dim_(hidden_dim),
      data_(3 * hidden_dim * (input_dim + hidden_dim + 1), 0.0) {}

std::size_t EncoderParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().input_dim();
}

std::size_t EncoderParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().hidden_dim();
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.size();
  return n;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams out;
  out.layers.reserve(layers.size());
  for (const auto& l : layers) out.layers.emplace_back(l.input_dim(), l.hidden_dim());
  return out;
}

void EncoderParams::validate() const {
  check_shape(!layers.empty(), "encoder has no layers");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    check_shape(layers[i].input_dim() == layers[i - 1].hidden_dim(),
                "layer " + std::to_string(i) + " input_dim " +
                    std::to_string(layers[i].input_dim()) +
                    " != previous hidden_dim " +
                    std::to_string(layers[i - 1].hidden_dim()));
  }
}

GruStep gru_cell_forward(std::span<const double> x,
                         std::span<const double> h_prev,
                         const GruLayerParams& params) {
  const std::size_t n = params.hidden_dim();
  check_shape(x.size() == params.input_dim(),
              "cell input has " + std::to_string(x.size()) + " values, expected " +
                  std::to_string(params.input_dim()));
  check_shape(h_prev.size() == n, "cell state size mismatch");

  GruStep s;
  s.x.assign(x.begin(), x.end());
  s.h_prev.assign(h_prev.begin(), h_prev.end());

  auto affine = [&](Gate g, std::span<const double> hv) {
    const auto b = params.b(g);
    std::vector<double> a(b.begin(), b.end());
    gemv_add(params.w(g), x, a);
    gemv_add(params.u(g), hv, a);
    return a;
  };

  s.z = affine(Gate::Update, h_prev);
  for (double& v : s.z) v = sigmoid(v);
  s.r = affine(Gate::Reset, h_prev);
  for (double& v : s.r) v = sigmoid(v);

  std::vector<double> gated(n);
  for (std::size_t i = 0; i < n; ++i) gated[i] = s.r[i] * h_prev[i];
  s.h_cand = affine(Gate::Candidate, gated);
  for (double& v : s.h_cand) v = std::tanh(v);

  s.h.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.h[i] = (1.0 - s.z[i]) * h_prev[i] + s.z[i] * s.h_cand[i];
  }
  return s;
}

GruStepGrad gru_cell_backward(const GruStep& s, std::span<const double> dh,
                              const GruLayerParams& params,
                              GruLayerParams& grads) {
  const std::size_t n = params.hidden_dim();
  check_shape(dh.size() == n, "cell output gradient size mismatch");

  GruStepGrad out;
  out.dx.assign(params.input_dim(), 0.0);
  out.dh_prev.assign(n, 0.0);

  std::vector<double> da_z(n), da_h(n), gated(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dz = dh[i] * (s.h_cand[i] - s.h_prev[i]);
    da_z[i] = dz * s.z[i] * (1.0 - s.z[i]);
    da_h[i] = dh[i] * s.z[i] * (1.0 - s.h_cand[i] * s.h_cand[i]);
    out.dh_prev[i] = dh[i] * (1.0 - s.z[i]);
    gated[i] = s.r[i] * s.h_prev[i];
  }

  // candidate
  outer_add(grads.w(Gate::Candidate), da_h, s.x);
  outer_add(grads.u(Gate::Candidate), da_h, gated);
  auto db_h = grads.b(Gate::Candidate);
  for (std::size_t i = 0; i < n; ++i) db_h[i] += da_h[i];
  gemv_t_add(params.w(Gate::Candidate), da_h, out.dx);
  std::vector<double> d_gated(n, 0.0);
  gemv_t_add(params.u(Gate::Candidate), da_h, d_gated);

  std::vector<double> da_r(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.dh_prev[i] += d_gated[i] * s.r[i];
    const double dr = d_gated[i] * s.h_prev[i];
    da_r[i] = dr * s.r[i] * (1.0 - s.r[i]);
  }

  for (Gate g : {Gate::Update, Gate::Reset}) {
    const auto& da = g == Gate::Update ? da_z : da_r;
    outer_add(grads.w(g), da, s.x);
    outer_add(grads.u(g), da, s.h_prev);
    auto db = grads.b(g);
    for (std::size_t i = 0; i < n; ++i) db[i] += da[i];
    gemv_t_add(params.w(g), da, out.dx);
    gemv_t_add(params.u(g), da, out.dh_prev);
  }
  return out;
}

namespace {

void check_input(const NameEncoding& enc, const EncoderParams& params) {
  params.validate();
  if (enc.valid_len == 0) {
    throw Error(ErrorCode::EmptySequence, "encoding has no valid rows");
  }
  check_shape(enc.dim == params.input_dim(),
              "encoding dim " + std::to_string(enc.dim) +
                  " != encoder input_dim " + std::to_string(params.input_dim()));
  check_shape(enc.valid_len <= enc.max_tokens &&
                  enc.matrix.size() == enc.max_tokens * enc.dim,
              "malformed encoding");
}

}  // namespace

EncodeResult encoder_forward(const NameEncoding& enc,
                             const EncoderParams& params) {
  check_input(enc, params);
  EncodeResult out;
  out.tape.steps.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    auto& steps = out.tape.steps[l];
    steps.reserve(enc.valid_len);
    std::vector<double> h(layer.hidden_dim(), 0.0);
    for (std::size_t t = 0; t < enc.valid_len; ++t) {
      std::span<const double> x =
          l == 0 ? enc.row(t) : std::span<const double>(out.tape.steps[l - 1][t].h);
      steps.push_back(gru_cell_forward(x, h, layer));
      h = steps.back().h;
    }
  }
  out.embedding = out.tape.steps.back().back().h;
  return out;
}

EmbeddingVector encode(const NameEncoding& enc, const EncoderParams& params) {
  check_input(enc, params);
  // Layer-major with only the previous layer's sequence kept.
  std::vector<std::vector<double>> seq;
  seq.reserve(enc.valid_len);
  for (std::size_t t = 0; t < enc.valid_len; ++t) {
    auto r = enc.row(t);
    seq.emplace_back(r.begin(), r.end());
  }
  for (const auto& layer : params.layers) {
    std::vector<double> h(layer.hidden_dim(), 0.0);
    for (auto& x : seq) {
      h = gru_cell_forward(x, h, layer).h;
      x = h;
    }
  }
  return seq.back();
}

void encoder_backward(const ForwardTape& tape,
                      std::span<const double> grad_embedding,
                      const EncoderParams& params, EncoderParams& grads) {
  check_shape(grad_embedding.size() == params.output_dim(),
              "embedding gradient has " + std::to_string(grad_embedding.size()) +
                  " values, expected " + std::to_string(params.output_dim()));
  check_shape(tape.steps.size() == params.layers.size() &&
                  grads.layers.size() == params.layers.size(),
              "tape does not match encoder");
  const std::size_t steps = tape.steps.back().size();

  // Gradient arriving at each step's output from the layer above.
  std::vector<std::vector<double>> from_above(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    from_above[t].assign(params.output_dim(), 0.0);
  }
  from_above.back().assign(grad_embedding.begin(), grad_embedding.end());

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    std::vector<std::vector<double>> to_below(steps);
    std::vector<double> carry(layer.hidden_dim(), 0.0);
    for (std::size_t t = steps; t-- > 0;) {
      std::vector<double> dh = from_above[t];
      for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += carry[i];
      auto g = gru_cell_backward(tape.steps[l][t], dh, layer, grads.layers[l]);
      carry = std::move(g.dh_prev);
      to_below[t] = std::move(g.dx);
    }
    from_above = std::move(to_below);
  }
}

EncoderParams encoder_backward(const ForwardTape& tape,
                               std::span<const double> grad_embedding,
                               const EncoderParams& params) {
  EncoderParams grads = params.zeros_like();
  encoder_backward(tape, grad_embedding, params, grads);
  return grads;
}

EmbeddingVector normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (!(sq > 0.0)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  const double norm = std::sqrt(sq);
  EmbeddingVector out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

std::vector<double> normalize_backward(std::span<const double> v,
                                       std::span<const double> grad_normalized) {
  check_shape(v.size() == grad_normalized.size(), "normalize gradient size mismatch");
  const auto y = normalize(v);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * grad_normalized[i];
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = (grad_normalized[i] - y[i] * dot) / norm;
  }
  return out;
}

EncoderParams init_params(std::span<const std::size_t> layer_dims,
                          std::size_t input_dim, std::uint64_t seed) {
  if (layer_dims.empty() || input_dim == 0) {
    throw Error(ErrorCode::InvalidArgument, "encoder needs >= 1 layer and input_dim >= 1");
  }
  std::mt19937_64 rng(seed);
  EncoderParams params;
  std::size_t in = input_dim;
  for (std::size_t hidden : layer_dims) {
    if (hidden == 0) throw Error(ErrorCode::InvalidArgument, "layer width must be >= 1");
    GruLayerParams layer(in, hidden);
    const double sw = std::sqrt(6.0 / static_cast<double>(in + hidden));
    const double su = std::sqrt(6.0 / static_cast<double>(hidden + hidden));
    for (Gate g : {Gate::Update, Gate::Reset, Gate::Candidate}) {
      std::uniform_real_distribution<double> uw(-sw, sw);
      for (double& v : layer.w(g)) v = uw(rng);
      std::uniform_real_distribution<double> uu(-su, su);
      for (double& v : layer.u(g)) v = uu(rng);
    }
    params.layers.push_back(std::move(layer));
    in = hidden;
  }
  return params;
}

}  // namespace fuzzyjoin
