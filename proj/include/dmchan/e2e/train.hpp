#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dmchan/channels/channel.hpp"
#include "dmchan/diffusion/train.hpp"
#include "dmchan/e2e/autoencoder.hpp"
#include "dmchan/nn/optim.hpp"

namespace dmchan::e2e {

/// Differentiable channel stand-in: codewords in, channel outputs out.
template <typename T>
using ChannelFn = std::function<Var<T>(Var<T>, Rng&)>;

template <typename T>
ChannelFn<T> true_channel(channels::ChannelModel model) {
  channels::validate(model);
  return [model](Var<T> x, Rng& rng) { return channels::apply_channel(model, x, rng); };
}

/// A trained conditional DM used as a generative channel. The network is
/// frozen while it stands in for the channel; gradients still reach c.
template <typename T>
struct DiffusionChannel {
  diffusion::Denoiser<T>* net = nullptr;
  diffusion::NoiseSchedule schedule;
  diffusion::PredictionMode mode = diffusion::PredictionMode::V;
  diffusion::SamplingPlan plan;

  Var<T> operator()(Var<T> x, Rng& rng) const { return diffusion::sample(schedule, *net, mode, plan, x, rng); }
};

enum class AeUpdate { Joint, DecoderOnly, EncoderOnly };

/// Joint updates both halves every batch; Successive runs a decoder pass then an encoder pass each epoch.
enum class UpdateOrder { Joint, Successive };

inline std::string_view to_string(UpdateOrder o) { return o == UpdateOrder::Joint ? "joint" : "successive"; }

inline UpdateOrder update_order_from_string(std::string_view s) {
  if (s == "joint") return UpdateOrder::Joint;
  if (s == "successive") return UpdateOrder::Successive;
  throw std::invalid_argument("unknown update order '" + std::string(s) + "'");
}

struct EpochRecord {
  std::size_t epoch = 0;
  std::string phase;  ///< joint | decoder | encoder
  double loss = 0.0;
  double lr = 0.0;
};

struct AeTrainOptions {
  std::vector<diffusion::LrStage> stages{{1e-3, 10}};
  std::size_t samples_per_epoch = 100000;
  std::size_t batch_size = 100;
  nn::OptimizerKind optimizer = nn::OptimizerKind::NAdam;
  UpdateOrder order = UpdateOrder::Joint;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Throws if a codeword batch misses the power constraint.
template <typename T>
void check_power(const Tensor<T>& x, std::size_t n) {
  const double p = average_power(x);
  const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-10;
  if (std::abs(p - static_cast<double>(n)) > tol * static_cast<double>(n))
    throw NumericalError("power constraint violated: average power " + std::to_string(p) + " != " +
                         std::to_string(n));
}

/**
 * Minibatch trainer holding separate optimizer states for encoder and decoder.
 * The states persist across calls so iterative training can resume them.
 */
template <typename T>
class AeTrainer {
 public:
  AeTrainer(Autoencoder<T>& ae, AeTrainOptions opts)
      : ae_(&ae),
        opts_(std::move(opts)),
        encoder_opt_({opts_.optimizer, opts_.stages.empty() ? 1e-3 : opts_.stages.front().lr}, ae.encoder_parameters()),
        decoder_opt_({opts_.optimizer, opts_.stages.empty() ? 1e-3 : opts_.stages.front().lr}, ae.decoder_parameters()) {
    if (opts_.batch_size < 1 || opts_.samples_per_epoch < 1 || opts_.stages.empty())
      throw std::invalid_argument("AeTrainer: empty training recipe");
  }

  const AeTrainOptions& options() const { return opts_; }

  /// One optimizer step on a random batch; returns the batch loss.
  double step(const ChannelFn<T>& channel, std::size_t batch, AeUpdate update, Rng& rng) {
    std::vector<std::size_t> m(batch);
    for (auto& v : m) v = rng.index(ae_->messages());
    auto params = ae_->parameters();
    nn::zero_grads(params);
    Tape<T> tape;
    Var<T> x = ae_->encode(tape, m);
    check_power(x.value(), ae_->dim());
    if (update == AeUpdate::DecoderOnly) x = tape.constant(x.value());
    Var<T> y = channel(x, rng);
    if (y.shape() != x.shape()) throw ShapeError("channel output shape differs from its input");
    Var<T> loss = ae_loss(ae_->decode(y), m);
    const double value = static_cast<double>(loss.value().item());
    if (!std::isfinite(value)) throw NumericalError("autoencoder training: non-finite loss");
    tape.backward(loss);
    if (update != AeUpdate::EncoderOnly) decoder_opt_.step();
    if (update != AeUpdate::DecoderOnly) encoder_opt_.step();
    return value;
  }

  /// One pass of samples_per_epoch messages; returns the mean batch loss.
  double pass(const ChannelFn<T>& channel, AeUpdate update, Rng& rng) {
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t done = 0; done < opts_.samples_per_epoch; done += opts_.batch_size, ++batches)
      total += step(channel, std::min(opts_.batch_size, opts_.samples_per_epoch - done), update, rng);
    return total / static_cast<double>(batches);
  }

  /// Runs every learning-rate stage; epochs are numbered from `first_epoch`.
  std::vector<EpochRecord> run(const ChannelFn<T>& channel, Rng& rng, std::size_t first_epoch = 1) {
    std::vector<EpochRecord> history;
    std::size_t epoch = first_epoch;
    for (const auto& stage : opts_.stages) {
      encoder_opt_.set_lr(stage.lr);
      decoder_opt_.set_lr(stage.lr);
      for (std::size_t e = 0; e < stage.epochs; ++e, ++epoch) {
        if (opts_.order == UpdateOrder::Joint) {
          record(history, {epoch, "joint", pass(channel, AeUpdate::Joint, rng), stage.lr});
        } else {
          record(history, {epoch, "decoder", pass(channel, AeUpdate::DecoderOnly, rng), stage.lr});
          record(history, {epoch, "encoder", pass(channel, AeUpdate::EncoderOnly, rng), stage.lr});
        }
      }
    }
    return history;
  }

 private:
  void record(std::vector<EpochRecord>& history, EpochRecord r) {
    history.push_back(std::move(r));
    if (opts_.on_epoch) opts_.on_epoch(history.back());
  }

  Autoencoder<T>* ae_;
  AeTrainOptions opts_;
  nn::Optimizer<T> encoder_opt_;
  nn::Optimizer<T> decoder_opt_;
};

/// Trains against the analytic channel simulator.
template <typename T>
std::vector<EpochRecord> train_model_aware(Autoencoder<T>& ae, const channels::ChannelModel& model,
                                           const AeTrainOptions& opts, Rng& rng) {
  AeTrainer<T> trainer(ae, opts);
  return trainer.run(true_channel<T>(model), rng);
}

namespace detail {

/// Freezes the DM for the lifetime of the guard.
template <typename T>
struct Freeze {
  explicit Freeze(diffusion::Denoiser<T>& net) : params(net.parameters()) { nn::set_requires_grad(params, false); }
  ~Freeze() { nn::set_requires_grad(params, true); }
  std::vector<Parameter<T>*> params;
};

template <typename T>
void check_dm(const Autoencoder<T>& ae, const DiffusionChannel<T>& dm) {
  if (dm.net == nullptr) throw std::invalid_argument("diffusion channel has no network");
  if (dm.net->dim() != ae.dim())
    throw ShapeError("diffusion channel dimension " + std::to_string(dm.net->dim()) +
                     " does not match autoencoder block length " + std::to_string(ae.dim()));
  if (dm.net->steps() != dm.schedule.steps()) throw std::invalid_argument("diffusion channel: T mismatch");
}

}  // namespace detail

/// Trains the autoencoder through a DM pre-trained on generic channel inputs.
template <typename T>
std::vector<EpochRecord> train_pretrained(Autoencoder<T>& ae, const DiffusionChannel<T>& dm,
                                          const AeTrainOptions& opts, Rng& rng) {
  detail::check_dm(ae, dm);
  detail::Freeze<T> frozen(*dm.net);
  AeTrainer<T> trainer(ae, opts);
  return trainer.run(dm, rng);
}

struct IterativeOptions {
  std::size_t alternations = 10;
  std::size_t dm_dataset_size = 100000;
  diffusion::DmTrainOptions dm;
  AeTrainOptions ae;
};

struct IterativeHistory {
  std::vector<std::vector<double>> dm_loss;  ///< per alternation, per epoch
  std::vector<EpochRecord> ae;
};

/// (f(m), channel(f(m))) pairs for uniformly drawn messages, encoded in batches.
template <typename T>
diffusion::Dataset<T> encoder_dataset(Autoencoder<T>& ae, const channels::ChannelModel& model, std::size_t size,
                                      std::size_t batch, Rng& rng) {
  std::vector<Tensor<T>> xs, ys;
  for (std::size_t done = 0; done < size; done += batch) {
    std::vector<std::size_t> m(std::min(batch, size - done));
    for (auto& v : m) v = rng.index(ae.messages());
    Tensor<T> x = ae.encode_values(m);
    ys.push_back(channels::apply_channel(model, x, rng));
    xs.push_back(std::move(x));
  }
  return {nn::concat_rows<T>(ys), nn::concat_rows<T>(xs)};
}

/**
 * Alternates (1) regenerating an encoder-specific dataset and fine-tuning the
 * DM on it with (2) training the autoencoder through the DM. With zero
 * alternations this is train_pretrained on the initial DM.
 */
template <typename T>
IterativeHistory train_iterative(Autoencoder<T>& ae, DiffusionChannel<T>& dm, const channels::ChannelModel& model,
                                 const IterativeOptions& opts, Rng& rng) {
  detail::check_dm(ae, dm);
  IterativeHistory history;
  if (opts.alternations == 0) {
    history.ae = train_pretrained(ae, dm, opts.ae, rng);
    return history;
  }
  AeTrainer<T> trainer(ae, opts.ae);
  std::size_t epoch = 1;
  for (std::size_t a = 0; a < opts.alternations; ++a) {
    const auto data = encoder_dataset(ae, model, opts.dm_dataset_size, opts.ae.batch_size, rng);
    history.dm_loss.push_back(diffusion::train_dm(*dm.net, dm.schedule, dm.mode, data, opts.dm, rng));
    detail::Freeze<T> frozen(*dm.net);
    auto records = trainer.run(dm, rng, epoch);
    epoch += diffusion::total_epochs(opts.ae.stages);
    history.ae.insert(history.ae.end(), records.begin(), records.end());
  }
  return history;
}

struct SerPoint {
  double ebn0_db = 0.0;
  double sigma = 0.0;
  std::size_t errors = 0;
  std::size_t trials = 0;
  double ser = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Wilson score interval for a binomial proportion (default 95%).
inline std::pair<double, double> wilson_interval(std::size_t errors, std::size_t trials,
                                                 double z = 1.959963984540054) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials), p = static_cast<double>(errors) / n, z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Counts decoding errors over `trials` uniformly drawn messages through the true channel.
template <typename T>
std::size_t count_errors(Autoencoder<T>& ae, const channels::ChannelModel& model, std::size_t trials,
                         std::size_t batch, Rng& rng) {
  std::size_t errors = 0;
  for (std::size_t done = 0; done < trials; done += batch) {
    std::vector<std::size_t> m(std::min(batch, trials - done));
    for (auto& v : m) v = rng.index(ae.messages());
    const Tensor<T> x = ae.encode_values(m);
    check_power(x, ae.dim());
    const auto decided = decide(ae.scores(channels::apply_channel(model, x, rng)));
    for (std::size_t i = 0; i < m.size(); ++i) errors += decided[i] != m[i];
  }
  return errors;
}

/**
 * Monte-Carlo SER sweep. The channel σ at each point follows from Eb/N0;
 * point k uses Rng(seed).split(k), so results do not depend on `threads`.
 */
template <typename T>
std::vector<SerPoint> evaluate_ser(Autoencoder<T>& ae, const channels::ChannelModel& model,
                                   std::span<const double> ebn0_db, std::size_t trials, std::uint64_t seed,
                                   std::size_t batch = 10000, unsigned threads = 1) {
  if (trials < 1 || batch < 1) throw std::invalid_argument("evaluate_ser: trials and batch must be >= 1");
  std::vector<SerPoint> out(ebn0_db.size());
  auto work = [&](std::size_t k) {
    SerPoint& p = out[k];
    p.ebn0_db = ebn0_db[k];
    p.sigma = channels::model_sigma_for_ebn0(model, p.ebn0_db, ae.messages(), ae.dim());
    Rng rng = Rng(seed).split(k);
    p.trials = trials;
    p.errors = count_errors(ae, channels::with_sigma(model, p.sigma), trials, batch, rng);
    p.ser = static_cast<double>(p.errors) / static_cast<double>(trials);
    std::tie(p.ci_low, p.ci_high) = wilson_interval(p.errors, trials);
  };
  if (threads <= 1 || out.size() <= 1) {
    for (std::size_t k = 0; k < out.size(); ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < out.size(); k += threads) work(k);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

/// True if SER never rises by more than the confidence bands allow as Eb/N0 grows.
inline bool ser_nonincreasing(std::span<const SerPoint> sweep) {
  for (std::size_t k = 1; k < sweep.size(); ++k)
    if (sweep[k].ci_low > sweep[k - 1].ci_high) return false;
  return true;
}

}  // namespace dmchan::e2e
