#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmchan/nn/layers.hpp"

namespace dmchan::e2e {

using nn::Parameter;
using nn::Rng;
using nn::Tape;
using nn::Tensor;
using nn::Var;

/**
 * Message autoencoder. Messages are 0-based indices in 0..M-1.
 *
 *   encoder: one-hot(M) → Dense(M) ELU → Dense(n) → batch power normalisation
 *   decoder: Dense(M) ELU → Dense(M) ELU → Dense(M) raw scores
 *
 * The normalisation scales the batch so its average ||x||² is n.
 */
template <typename T>
class Autoencoder {
 public:
  Autoencoder() = default;

  Autoencoder(std::size_t messages, std::size_t n, Rng& rng)
      : m_(messages),
        n_(n),
        enc1_("encoder.dense1", messages, messages, rng),
        enc2_("encoder.dense2", messages, n, rng),
        dec1_("decoder.dense1", n, messages, rng),
        dec2_("decoder.dense2", messages, messages, rng),
        dec3_("decoder.dense3", messages, messages, rng) {
    if (messages < 2) throw std::invalid_argument("Autoencoder: M must be >= 2");
    if (n < 1) throw std::invalid_argument("Autoencoder: n must be >= 1");
  }

  std::size_t messages() const { return m_; }
  std::size_t dim() const { return n_; }

  Tensor<T> one_hot(std::span<const std::size_t> m) const {
    Tensor<T> x({m.size(), m_});
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (m[r] >= m_)
        throw std::out_of_range("encode: message " + std::to_string(m[r]) + " outside 0.." + std::to_string(m_ - 1));
      x(r, m[r]) = T{1};
    }
    return x;
  }

  /// Codewords [batch, n] for a batch of messages.
  Var<T> encode(Tape<T>& tape, std::span<const std::size_t> m) {
    if (m.empty()) throw std::invalid_argument("encode: empty batch");
    Var<T> h = nn::activation(nn::Activation::ELU, enc1_(tape.constant(one_hot(m))));
    return nn::normalize_power(enc2_(h), static_cast<T>(n_));
  }

  /// Raw likelihood scores [batch, M].
  Var<T> decode(Var<T> y) {
    const auto& s = y.shape();
    if (s.size() != 2 || s[1] != n_)
      throw ShapeError("decode: expected [batch, " + std::to_string(n_) + "], got " + nn::shape_string(s));
    Var<T> h = nn::activation(nn::Activation::ELU, dec1_(y));
    h = nn::activation(nn::Activation::ELU, dec2_(h));
    return dec3_(h);
  }

  Tensor<T> encode_values(std::span<const std::size_t> m) {
    Tape<T> tape(false);
    return encode(tape, m).value();
  }

  Tensor<T> scores(const Tensor<T>& y) {
    Tape<T> tape(false);
    return decode(tape.constant(y)).value();
  }

  std::vector<Parameter<T>*> encoder_parameters() {
    return {&enc1_.weight(), &enc1_.bias(), &enc2_.weight(), &enc2_.bias()};
  }

  std::vector<Parameter<T>*> decoder_parameters() {
    return {&dec1_.weight(), &dec1_.bias(), &dec2_.weight(), &dec2_.bias(), &dec3_.weight(), &dec3_.bias()};
  }

  std::vector<Parameter<T>*> parameters() {
    auto p = encoder_parameters();
    for (auto* q : decoder_parameters()) p.push_back(q);
    return p;
  }

  std::vector<const Parameter<T>*> parameters() const {
    auto ps = const_cast<Autoencoder*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  template <typename U>
  Autoencoder<U> cast() const {
    Autoencoder<U> a;
    a.m_ = m_;
    a.n_ = n_;
    a.enc1_ = enc1_.template cast<U>();
    a.enc2_ = enc2_.template cast<U>();
    a.dec1_ = dec1_.template cast<U>();
    a.dec2_ = dec2_.template cast<U>();
    a.dec3_ = dec3_.template cast<U>();
    return a;
  }

 private:
  template <typename>
  friend class Autoencoder;

  std::size_t m_ = 0;
  std::size_t n_ = 0;
  nn::Dense<T> enc1_, enc2_;
  nn::Dense<T> dec1_, dec2_, dec3_;
};

/// Cross-entropy of raw scores against message labels, averaged over the batch.
template <typename T>
Var<T> ae_loss(Var<T> scores, std::span<const std::size_t> messages) {
  return nn::softmax_cross_entropy(scores, messages);
}

/// Row-wise argmax; ties go to the lowest index.
template <typename T>
std::vector<std::size_t> decide(const Tensor<T>& scores) {
  if (scores.rank() != 2) throw ShapeError("decide: expected [batch, M] scores");
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = best;
  }
  return out;
}

/// Average ||x_b||² over the rows of a codeword batch.
template <typename T>
double average_power(const Tensor<T>& x) {
  double s = 0.0;
  for (T v : x.data()) s += static_cast<double>(v) * static_cast<double>(v);
  return s / static_cast<double>(x.rows());
}

}  // namespace dmchan::e2e
