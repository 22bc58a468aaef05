#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fuzzyjoin/name_encoding.hpp"

namespace fuzzyjoin {

using EmbeddingVector = std::vector<double>;

enum class Gate { Update = 0, Reset = 1, Candidate = 2 };

/// Weights of one GRU layer stored in a single buffer, gate by gate:
/// W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h (matrices row-major).
class GruLayerParams {
 public:
  GruLayerParams() = default;
  GruLayerParams(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden_dim() const noexcept { return hidden_dim_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> w(Gate g) { return block(g, 0, hidden_dim_ * input_dim_); }
  std::span<double> u(Gate g) {
    return block(g, hidden_dim_ * input_dim_, hidden_dim_ * hidden_dim_);
  }
  std::span<double> b(Gate g) {
    return block(g, hidden_dim_ * (input_dim_ + hidden_dim_), hidden_dim_);
  }
  std::span<const double> w(Gate g) const {
    return block(g, 0, hidden_dim_ * input_dim_);
  }
  std::span<const double> u(Gate g) const {
    return block(g, hidden_dim_ * input_dim_, hidden_dim_ * hidden_dim_);
  }
  std::span<const double> b(Gate g) const {
    return block(g, hidden_dim_ * (input_dim_ + hidden_dim_), hidden_dim_);
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const GruLayerParams&,
                         const GruLayerParams&) = default;

 private:
  std::size_t gate_stride() const noexcept {
    return hidden_dim_ * (input_dim_ + hidden_dim_ + 1);
  }
  std::span<double> block(Gate g, std::size_t off, std::size_t n) {
    return {data_.data() + static_cast<std::size_t>(g) * gate_stride() + off,
            n};
  }
  std::span<const double> block(Gate g, std::size_t off, std::size_t n) const {
    return {data_.data() + static_cast<std::size_t>(g) * gate_stride() + off,
            n};
  }

  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  std::vector<double> data_;
};

/// Stack of GRU layers shared by anchor, positive and negative branches.
/// The same type doubles as the gradient accumulator.
struct EncoderParams {
  std::vector<GruLayerParams> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  EncoderParams zeros_like() const;
  /// Throws Error(ShapeMismatch) if the layer chain is inconsistent.
  void validate() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Activations of one cell step, kept for the backward pass.
struct GruStep {
  std::vector<double> x;
  std::vector<double> h_prev;
  std::vector<double> z;
  std::vector<double> r;
  std::vector<double> h_cand;
  std::vector<double> h;
};

struct ForwardTape {
  /// steps[layer][t]; every layer has valid_len steps.
  std::vector<std::vector<GruStep>> steps;
};

struct EncodeResult {
  EmbeddingVector embedding;
  ForwardTape tape;
};

/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h), h' = (1 − z) ⊙ h + z ⊙ h̃.
GruStep gru_cell_forward(std::span<const double> x,
                         std::span<const double> h_prev,
                         const GruLayerParams& params);

struct GruStepGrad {
  std::vector<double> dx;
  std::vector<double> dh_prev;
};

/// Accumulates parameter gradients into `grads` and returns the input and
/// previous-state gradients for upstream dh.
GruStepGrad gru_cell_backward(const GruStep& step, std::span<const double> dh,
                              const GruLayerParams& params,
                              GruLayerParams& grads);

/// Runs each layer over the first valid_len rows with a zero initial state and
/// returns the last layer's final hidden state.
EncodeResult encoder_forward(const NameEncoding& enc,
                             const EncoderParams& params);

/// Forward pass without recording a tape.
EmbeddingVector encode(const NameEncoding& enc, const EncoderParams& params);

/// Adds d(embedding · grad_embedding)/d(params) into `grads`.
void encoder_backward(const ForwardTape& tape,
                      std::span<const double> grad_embedding,
                      const EncoderParams& params, EncoderParams& grads);

EncoderParams encoder_backward(const ForwardTape& tape,
                               std::span<const double> grad_embedding,
                               const EncoderParams& params);

/// v / ||v||. Throws Error(ZeroVector) when the norm is zero.
EmbeddingVector normalize(std::span<const double> v);

/// Gradient through normalize: (g − y (y · g)) / ||v|| with y = v / ||v||.
std::vector<double> normalize_backward(std::span<const double> v,
                                       std::span<const double> grad_normalized);

/// Glorot-uniform W and U, zero biases.
EncoderParams init_params(std::span<const std::size_t> layer_dims,
                          std::size_t input_dim, std::uint64_t seed);

}  // namespace fuzzyjoin
