#include <gtest/gtest.h>

#include <cmath>

#include "dmchan/e2e/train.hpp"
#include "support/gradcheck.hpp"

using namespace dmchan;
using namespace dmchan::e2e;
using testing_support::random_tensor;

namespace {

template <typename T>
std::vector<T> flatten(const std::vector<Parameter<T>*>& ps) {
  std::vector<T> out;
  for (auto* p : ps) out.insert(out.end(), p->value().data().begin(), p->value().data().end());
  return out;
}

template <typename T>
void zero_params(const std::vector<Parameter<T>*>& ps) {
  for (auto* p : ps)
    for (auto& v : p->value().data()) v = T{0};
}

/// M = 2, n = 2: m = 0 → (1, 1), m = 1 → (−1, −1); the decoder scores the sign of y1 + y2.
Autoencoder<double> separable_pair() {
  Rng rng(0);
  Autoencoder<double> ae(2, 2, rng);
  auto enc = ae.encoder_parameters();
  enc[0]->value() = Tensor<double>::matrix(2, 2, {1, 0, 0, 1});
  enc[1]->value() = Tensor<double>({2}, 0.0);
  enc[2]->value() = Tensor<double>::matrix(2, 2, {1, 1, -1, -1});
  enc[3]->value() = Tensor<double>({2}, 0.0);
  auto dec = ae.decoder_parameters();
  dec[0]->value() = Tensor<double>::matrix(2, 2, {1, -1, 1, -1});
  dec[2]->value() = Tensor<double>::matrix(2, 2, {1, 0, 0, 1});
  dec[4]->value() = Tensor<double>::matrix(2, 2, {1, 0, 0, 1});
  for (std::size_t k : {1u, 3u, 5u}) dec[k]->value() = Tensor<double>({2}, 0.0);
  return ae;
}

double log_sum_exp_loss(const Tensor<double>& s, const std::vector<std::size_t>& m) {
  double total = 0.0;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double mx = s(r, 0);
    for (std::size_t c = 1; c < s.cols(); ++c) mx = std::max(mx, s(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < s.cols(); ++c) z += std::exp(s(r, c) - mx);
    total += mx + std::log(z) - s(r, m[r]);
  }
  return total / static_cast<double>(s.rows());
}

diffusion::Denoiser<double> small_dm(std::size_t n, std::size_t T, Rng& rng) {
  return diffusion::Denoiser<double>(n, 8, T, rng);
}

DiffusionChannel<double> dm_channel(diffusion::Denoiser<double>& net, std::size_t T) {
  DiffusionChannel<double> ch;
  ch.net = &net;
  ch.schedule = diffusion::make_schedule(diffusion::ScheduleKind::Cosine, T);
  ch.mode = diffusion::PredictionMode::V;
  ch.plan = diffusion::make_plan(diffusion::Sampler::DDPM, T);
  return ch;
}

}  // namespace

// ---- encoder

TEST(Encode, PowerNormalisedPerBatch) {
  Rng rng(1);
  Autoencoder<double> ae(16, 7, rng);
  for (std::size_t batch : {1u, 3u, 100u}) {
    std::vector<std::size_t> m(batch);
    for (auto& v : m) v = rng.index(16);
    EXPECT_NEAR(average_power(ae.encode_values(m)), 7.0, 1e-10) << batch;
  }
  Autoencoder<float> aef(4, 2, rng);
  const std::vector<std::size_t> m{0, 1, 2, 3, 3};
  EXPECT_NEAR(average_power(aef.encode_values(m)), 2.0, 1e-5);
}

TEST(Encode, IdenticalMessagesGiveIdenticalCodewords) {
  Rng rng(2);
  Autoencoder<double> ae(8, 3, rng);
  const std::vector<std::size_t> m(5, 6);
  const auto x = ae.encode_values(m);
  for (std::size_t r = 1; r < 5; ++r)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(x(r, j), x(0, j));
  // every row carries power n when the batch is homogeneous
  double p = 0.0;
  for (std::size_t j = 0; j < 3; ++j) p += x(0, j) * x(0, j);
  EXPECT_NEAR(p, 3.0, 1e-12);
}

TEST(Encode, RejectsOutOfRangeMessage) {
  Rng rng(3);
  Autoencoder<double> ae(4, 2, rng);
  EXPECT_THROW(ae.encode_values(std::vector<std::size_t>{0, 4}), std::out_of_range);
  EXPECT_THROW(ae.encode_values(std::vector<std::size_t>{}), std::invalid_argument);
  EXPECT_THROW(Autoencoder<double>(1, 2, rng), std::invalid_argument);
}

TEST(Encode, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  Autoencoder<double> ae(6, 4, rng);
  const std::vector<std::size_t> m{0, 5, 2, 2, 3, 1, 4};
  const auto w = random_tensor<double>({7, 4}, rng);
  auto loss = [&](Tape<double>& tape) { return nn::sum(nn::mul(ae.encode(tape, m), tape.constant(w))); };
  const auto r = testing_support::check_params<double>(loss, ae.encoder_parameters(), 1e-5);
  EXPECT_LE(r.max_rel, 1e-5);

  auto aef = ae.cast<float>();
  const auto wf = w.cast<float>();
  auto lossf = [&](Tape<float>& tape) { return nn::sum(nn::mul(aef.encode(tape, m), tape.constant(wf))); };
  const auto rf = testing_support::check_params<float>(lossf, aef.encoder_parameters(), 1e-2);
  EXPECT_LE(rf.max_tensor_rel, 1e-2);
}

TEST(Encode, FullLossGradientThroughChannel) {
  Rng rng(5);
  Autoencoder<double> ae(4, 2, rng);
  const std::vector<std::size_t> m{0, 1, 2, 3, 1, 2};
  const channels::ChannelModel awgn = channels::Awgn{0.4};
  auto loss = [&](Tape<double>& tape) {
    Rng frozen(17);
    return ae_loss(ae.decode(channels::apply_channel(awgn, ae.encode(tape, m), frozen)), m);
  };
  const auto r = testing_support::check_params<double>(loss, ae.parameters(), 1e-5);
  EXPECT_LE(r.max_rel, 1e-5);
}

// ---- decoder

TEST(Decode, ZeroDecoderGivesUniformScores) {
  Rng rng(6);
  Autoencoder<double> ae(5, 3, rng);
  zero_params(ae.decoder_parameters());
  const auto s = ae.scores(random_tensor<double>({4, 3}, rng));
  for (double v : s.data()) EXPECT_EQ(v, 0.0);
  for (std::size_t d : decide(s)) EXPECT_EQ(d, 0u);
}

TEST(Decode, RowPermutationEquivariance) {
  Rng rng(7);
  Autoencoder<double> ae(5, 3, rng);
  const auto y = random_tensor<double>({6, 3}, rng);
  const std::vector<std::size_t> perm{5, 2, 0, 4, 1, 3};
  const auto s = ae.scores(y), sp = ae.scores(y.gather_rows(perm));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(sp(i, c), s(perm[i], c));
}

TEST(Decode, ArgmaxInvariantToConstantShift) {
  Rng rng(8);
  auto s = random_tensor<double>({50, 8}, rng);
  const auto before = decide(s);
  for (std::size_t r = 0; r < 50; ++r) {
    const double shift = 100.0 * rng.normal();
    for (std::size_t c = 0; c < 8; ++c) s(r, c) += shift;
  }
  EXPECT_EQ(decide(s), before);
}

TEST(Decode, TiesGoToLowestIndex) {
  const auto s = Tensor<double>::matrix(2, 4, {1, 3, 3, 0, 2, 2, 2, 2});
  EXPECT_EQ(decide(s), (std::vector<std::size_t>{1, 0}));
}

TEST(Decode, ShapeError) {
  Rng rng(9);
  Autoencoder<double> ae(4, 2, rng);
  EXPECT_THROW(ae.scores(Tensor<double>({3, 3}, 0.0)), dmchan::ShapeError);
}

TEST(Decode, SeparableNoiselessInstanceIsErrorFree) {
  auto ae = separable_pair();
  const auto x = ae.encode_values(std::vector<std::size_t>{0, 1});
  EXPECT_DOUBLE_EQ(x(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(x(1, 1), -1.0);
  Rng rng(10);
  EXPECT_EQ(count_errors(ae, channels::Awgn{0.0}, 10000, 1000, rng), 0u);
  // the sweep sets σ from Eb/N0; at 30 dB (σ ≈ 0.03) the ±1 codewords never cross
  const std::vector<double> ebn0{30.0};
  const auto sweep = evaluate_ser(ae, channels::Awgn{1.0}, ebn0, 10000, 3);
  EXPECT_EQ(sweep[0].errors, 0u);
  EXPECT_EQ(sweep[0].ser, 0.0);
}

// ---- loss

TEST(Loss, UniformScoresGiveLogM) {
  for (std::size_t M : {2u, 4u, 16u}) {
    Tape<double> tape(false);
    std::vector<std::size_t> m{0, M - 1, M / 2};
    const auto l = ae_loss(tape.constant(Tensor<double>({3, M}, 0.7)), m);
    EXPECT_NEAR(l.value().item(), std::log(static_cast<double>(M)), 1e-12);
  }
}

TEST(Loss, ScaledCorrectOneHotTendsToZero) {
  const std::vector<std::size_t> m{2, 0};
  double prev = 1e9;
  for (double scale : {1.0, 5.0, 20.0, 50.0}) {
    Tensor<double> s({2, 4}, 0.0);
    s(0, 2) = scale;
    s(1, 0) = scale;
    Tape<double> tape(false);
    const double l = ae_loss(tape.constant(s), m).value().item();
    EXPECT_LT(l, prev);
    prev = l;
  }
  EXPECT_LT(prev, 1e-20);
}

TEST(Loss, MatchesLogSumExpOracle) {
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    const auto s = random_tensor<double>({9, 6}, rng, 10.0);
    std::vector<std::size_t> m(9);
    for (auto& v : m) v = rng.index(6);
    Tape<double> tape(false);
    EXPECT_NEAR(ae_loss(tape.constant(s), m).value().item(), log_sum_exp_loss(s, m), 1e-6);
  }
}

// ---- SER evaluation

TEST(Ser, RandomGuessingBaseline) {
  Rng rng(12);
  Autoencoder<double> ae(4, 2, rng);
  zero_params(ae.decoder_parameters());  // always decides message 0
  const std::vector<double> ebn0{5.0};
  const auto p = evaluate_ser(ae, channels::Awgn{1.0}, ebn0, 100000, 13).front();
  EXPECT_NEAR(p.ser, 0.75, 0.01);
  EXPECT_LE(p.ci_low, p.ser);
  EXPECT_GE(p.ci_high, p.ser);
}

TEST(Ser, IndependentOfThreadCount) {
  Rng rng(14);
  Autoencoder<float> ae(4, 2, rng);
  const std::vector<double> ebn0{0, 2, 4, 6};
  const auto a = evaluate_ser(ae, channels::Awgn{1.0}, ebn0, 5000, 99, 1000, 1);
  const auto b = evaluate_ser(ae, channels::Awgn{1.0}, ebn0, 5000, 99, 1000, 3);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(a[k].errors, b[k].errors);
    EXPECT_DOUBLE_EQ(a[k].sigma, channels::ebn0_to_sigma(ebn0[k], 4, 2));
  }
}

TEST(Ser, WilsonInterval) {
  const double z = 1.959963984540054;
  auto [lo0, hi0] = wilson_interval(0, 100);
  EXPECT_NEAR(lo0, 0.0, 1e-15);
  EXPECT_NEAR(hi0, z * z / (100 + z * z), 1e-15);
  auto [lo, hi] = wilson_interval(50, 100);
  const double half = z * std::sqrt(0.25 / 100 + z * z / 40000) / (1 + z * z / 100);
  EXPECT_NEAR(lo, 0.5 - half, 1e-15);
  EXPECT_NEAR(hi, 0.5 + half, 1e-15);
  EXPECT_EQ(wilson_interval(0, 0), std::make_pair(0.0, 1.0));
}

TEST(Ser, MonotonicityWithinBands) {
  auto pt = [](double ser, double lo, double hi) {
    SerPoint p;
    p.ser = ser;
    p.ci_low = lo;
    p.ci_high = hi;
    return p;
  };
  const std::vector<SerPoint> down{pt(0.3, 0.29, 0.31), pt(0.1, 0.09, 0.11), pt(0.105, 0.095, 0.115)};
  const std::vector<SerPoint> up{pt(0.1, 0.09, 0.11), pt(0.2, 0.19, 0.21)};
  EXPECT_TRUE(ser_nonincreasing(down));
  EXPECT_FALSE(ser_nonincreasing(up));
}

// ---- training

TEST(Train, DecoderOnlyLeavesEncoderUnchanged) {
  Rng rng(15);
  Autoencoder<double> ae(4, 2, rng);
  AeTrainOptions opts;
  opts.stages = {{1e-2, 1}};
  opts.samples_per_epoch = 500;
  opts.batch_size = 50;
  AeTrainer<double> trainer(ae, opts);
  const auto enc = flatten(ae.encoder_parameters());
  const auto dec = flatten(ae.decoder_parameters());
  trainer.pass(true_channel<double>(channels::Awgn{0.5}), AeUpdate::DecoderOnly, rng);
  EXPECT_EQ(flatten(ae.encoder_parameters()), enc);
  EXPECT_NE(flatten(ae.decoder_parameters()), dec);
  const auto dec2 = flatten(ae.decoder_parameters());
  trainer.pass(true_channel<double>(channels::Awgn{0.5}), AeUpdate::EncoderOnly, rng);
  EXPECT_EQ(flatten(ae.decoder_parameters()), dec2);
  EXPECT_NE(flatten(ae.encoder_parameters()), enc);
}

TEST(Train, EncoderGradientsFlowThroughBothChannels) {
  Rng rng(16);
  Autoencoder<double> ae(4, 2, rng);
  auto net = small_dm(2, 6, rng);
  const auto dm = dm_channel(net, 6);
  AeTrainOptions opts;
  opts.stages = {{1e-3, 1}};
  AeTrainer<double> trainer(ae, opts);
  auto grad_norm = [&] {
    double s = 0.0;
    for (auto* p : ae.encoder_parameters())
      for (double g : p->grad().data()) s += g * g;
    return std::sqrt(s);
  };
  trainer.step(dm, 32, AeUpdate::Joint, rng);
  EXPECT_GT(grad_norm(), 0.0);
  trainer.step(true_channel<double>(channels::Awgn{0.5}), 32, AeUpdate::Joint, rng);
  EXPECT_GT(grad_norm(), 0.0);
  trainer.step(true_channel<double>(channels::Rayleigh{1.0, 0.3}), 32, AeUpdate::Joint, rng);
  EXPECT_GT(grad_norm(), 0.0);
}

TEST(Train, PretrainedKeepsDiffusionModelFrozen) {
  Rng rng(17);
  Autoencoder<double> ae(4, 2, rng);
  auto net = small_dm(2, 6, rng);
  const auto before = flatten(net.parameters());
  AeTrainOptions opts;
  opts.stages = {{1e-2, 2}};
  opts.samples_per_epoch = 200;
  opts.batch_size = 50;
  const auto hist = train_pretrained(ae, dm_channel(net, 6), opts, rng);
  EXPECT_EQ(hist.size(), 2u);
  EXPECT_EQ(flatten(net.parameters()), before);
  for (auto* p : net.parameters()) {
    EXPECT_TRUE(p->requires_grad());
    for (double g : p->grad().data()) EXPECT_EQ(g, 0.0);
  }
}

TEST(Train, SuccessiveOrderRecordsBothPhases) {
  Rng rng(18);
  Autoencoder<double> ae(4, 2, rng);
  AeTrainOptions opts;
  opts.stages = {{1e-2, 2}, {1e-3, 1}};
  opts.samples_per_epoch = 100;
  opts.batch_size = 50;
  opts.order = UpdateOrder::Successive;
  const auto hist = train_model_aware(ae, channels::Awgn{0.5}, opts, rng);
  ASSERT_EQ(hist.size(), 6u);
  EXPECT_EQ(hist[0].phase, "decoder");
  EXPECT_EQ(hist[1].phase, "encoder");
  EXPECT_EQ(hist[5].epoch, 3u);
  EXPECT_DOUBLE_EQ(hist[5].lr, 1e-3);
}

TEST(Train, ZeroAlternationsEqualsPretrained) {
  AeTrainOptions ae_opts;
  ae_opts.stages = {{1e-2, 1}};
  ae_opts.samples_per_epoch = 200;
  ae_opts.batch_size = 50;
  auto run = [&](bool iterative) {
    Rng init(19), rng(20);
    Autoencoder<double> ae(4, 2, init);
    auto net = small_dm(2, 5, init);
    auto dm = dm_channel(net, 5);
    if (iterative) {
      IterativeOptions it;
      it.alternations = 0;
      it.ae = ae_opts;
      train_iterative(ae, dm, channels::Awgn{0.5}, it, rng);
    } else {
      train_pretrained(ae, dm, ae_opts, rng);
    }
    return flatten(ae.parameters());
  };
  EXPECT_EQ(run(true), run(false));
}

TEST(Train, IterativeAlternationFineTunesDiffusionModel) {
  Rng init(21), rng(22);
  Autoencoder<double> ae(4, 2, init);
  auto net = small_dm(2, 5, init);
  auto dm = dm_channel(net, 5);
  const auto before = flatten(net.parameters());
  IterativeOptions it;
  it.alternations = 2;
  it.dm_dataset_size = 200;
  it.dm.stages = {{1e-3, 2}};
  it.dm.batch_size = 50;
  it.ae.stages = {{1e-2, 1}};
  it.ae.samples_per_epoch = 100;
  it.ae.batch_size = 50;
  const auto hist = train_iterative(ae, dm, channels::Awgn{0.5}, it, rng);
  ASSERT_EQ(hist.dm_loss.size(), 2u);
  EXPECT_EQ(hist.dm_loss[0].size(), 2u);
  ASSERT_EQ(hist.ae.size(), 2u);
  EXPECT_EQ(hist.ae[1].epoch, 2u);
  EXPECT_NE(flatten(net.parameters()), before);
}

TEST(Train, DimensionMismatchRejected) {
  Rng rng(23);
  Autoencoder<double> ae(4, 2, rng);
  auto net = small_dm(3, 5, rng);
  AeTrainOptions opts;
  EXPECT_THROW(train_pretrained(ae, dm_channel(net, 5), opts, rng), dmchan::ShapeError);
  DiffusionChannel<double> empty;
  EXPECT_THROW(train_pretrained(ae, empty, opts, rng), std::invalid_argument);
}

TEST(Train, EncoderDatasetPairsCodewordsWithChannelOutputs) {
  Rng rng(24);
  auto ae = separable_pair();
  const auto data = encoder_dataset(ae, channels::Awgn{0.0}, 250, 100, rng);
  ASSERT_EQ(data.size(), 250u);
  for (std::size_t i = 0; i < data.x0.size(); ++i) EXPECT_EQ(data.x0[i], data.c[i]);
  for (std::size_t r = 0; r < 250; ++r) EXPECT_DOUBLE_EQ(std::abs(data.c(r, 0)), 1.0);
}
