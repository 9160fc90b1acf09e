#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dmchan/diffusion/sampler.hpp"
#include "dmchan/diffusion/train.hpp"
#include "dmchan/e2e/train.hpp"
#include "dmchan/io/checkpoint.hpp"
#include "dmchan/io/config.hpp"
#include "dmchan/io/models.hpp"
#include "dmchan/io/results.hpp"
#include "dmchan/metrics/covariance.hpp"
#include "dmchan/metrics/swd.hpp"

namespace dmchan::cli {

namespace fs = std::filesystem;
using io::json;
using nn::Rng;
using nn::Stream;
using nn::Tensor;

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-data", "train-dm", "train-ae", "eval-swd", "eval-ser",
                                              "eval-cov", "sample",   "bench-sampling", "replay"};
  return names;
}

struct RunOptions {
  std::string command;
  io::ExperimentConfig config;
  std::optional<std::uint64_t> seed;  ///< overrides config.seed
  std::size_t scale = 1;              ///< divisor for dataset sizes and trial counts
  fs::path out = "out";
  std::optional<fs::path> checkpoint;
  std::optional<std::string> algorithm;  ///< train-ae override
  std::optional<fs::path> conditions;    ///< sample: CSV of channel inputs
  std::string build_id = "unknown";
  std::ostream* log = &std::clog;
};

/// Manifest fields that let `replay` re-run a command.
inline RunOptions options_from_manifest(const json& m, fs::path out) {
  RunOptions o;
  try {
    o.command = m.at("command").get<std::string>();
    o.config = io::parse_config(m.at("config"));
    o.seed = m.at("seed").get<std::uint64_t>();
    o.scale = m.at("scale").get<std::size_t>();
    if (!m.at("checkpoint").is_null()) o.checkpoint = m.at("checkpoint").get<std::string>();
    if (m.contains("algorithm") && !m.at("algorithm").is_null()) o.algorithm = m.at("algorithm").get<std::string>();
    if (m.contains("conditions") && !m.at("conditions").is_null()) o.conditions = m.at("conditions").get<std::string>();
  } catch (const json::exception& e) {
    throw io::ConfigError(std::string("manifest: ") + e.what());
  }
  if (o.command == "replay") throw io::ConfigError("manifest: cannot replay a replay");
  o.out = std::move(out);
  return o;
}

namespace detail {

struct Context {
  RunOptions opts;
  io::ExperimentConfig cfg;
  Rng root;
  json artifacts = json::array();
  json extra = json::object();

  std::ostream& log() { return *opts.log; }

  std::size_t scaled(std::size_t count, std::size_t min = 1) const {
    return std::max(min, count / std::max<std::size_t>(1, opts.scale));
  }

  fs::path artifact(const std::string& name) {
    artifacts.push_back(name);
    return opts.out / name;
  }

  const fs::path& require_checkpoint(const char* what) const {
    if (!opts.checkpoint) throw io::ConfigError(opts.command + ": --checkpoint <" + what + " checkpoint> is required");
    return *opts.checkpoint;
  }
};

inline Tensor<float> gaussian_conditions(std::size_t rows, std::size_t n, Rng& rng) {
  Tensor<float> c({rows, n});
  for (auto& v : c.data()) v = static_cast<float>(rng.normal());
  return c;
}

/// Channel inputs c ~ N(0, I) and their true channel outputs.
inline diffusion::Dataset<float> generate_pairs(const io::ExperimentConfig& cfg, std::size_t rows, Rng& rng) {
  Tensor<float> c = gaussian_conditions(rows, cfg.n, rng);
  Tensor<float> y = channels::apply_channel(cfg.channel.model, c, rng);
  return {std::move(y), std::move(c)};
}

inline void write_pairs(const fs::path& path, const Tensor<float>& c, const Tensor<float>& y) {
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < c.cols(); ++j) cols.push_back("c" + std::to_string(j + 1));
  for (std::size_t j = 0; j < y.cols(); ++j) cols.push_back("y" + std::to_string(j + 1));
  io::CsvWriter csv(path, cols);
  std::vector<std::string> cells(cols.size());
  for (std::size_t r = 0; r < c.rows(); ++r) {
    for (std::size_t j = 0; j < c.cols(); ++j) cells[j] = io::format_number(c(r, j));
    for (std::size_t j = 0; j < y.cols(); ++j) cells[c.cols() + j] = io::format_number(y(r, j));
    csv.row(cells);
  }
}

inline io::LoadedDm load_dm_for(Context& ctx) {
  io::LoadedDm dm = io::load_dm(io::load_checkpoint(ctx.require_checkpoint("dm").string()));
  io::require_compatible(dm, ctx.cfg);
  return dm;
}

inline void gen_data(Context& ctx) {
  Rng rng = ctx.root.stream(Stream::Data);
  const auto data = generate_pairs(ctx.cfg, ctx.scaled(ctx.cfg.dm.dataset_size), rng);
  write_pairs(ctx.artifact("data.csv"), data.c, data.x0);
  ctx.log() << "gen-data: wrote " << data.size() << " pairs\n";
}

inline diffusion::DmTrainOptions dm_train_options(Context& ctx, io::JsonLines* history) {
  diffusion::DmTrainOptions o;
  o.stages = ctx.cfg.dm.stages;
  o.batch_size = ctx.cfg.dm.batch_size;
  o.optimizer = ctx.cfg.dm.optimizer;
  std::vector<double> lrs;
  for (const auto& s : o.stages)
    for (std::size_t e = 0; e < s.epochs; ++e) lrs.push_back(s.lr);
  o.on_epoch = [&ctx, history, lrs](std::size_t epoch, double loss) {
    ctx.log() << "  epoch " << epoch << " loss " << loss << '\n';
    if (history) history->write({{"epoch", epoch}, {"loss", loss}, {"lr", lrs[(epoch - 1) % lrs.size()]}});
  };
  return o;
}

inline void train_dm(Context& ctx) {
  const auto& cfg = ctx.cfg;
  Rng data_rng = ctx.root.stream(Stream::Data);
  const auto data = generate_pairs(cfg, ctx.scaled(cfg.dm.dataset_size), data_rng);
  io::LoadedDm dm;
  if (ctx.opts.checkpoint) {
    dm = load_dm_for(ctx);
  } else {
    Rng init = ctx.root.stream(Stream::Init);
    dm.net = diffusion::Denoiser<float>(cfg.n, cfg.dm.hidden, cfg.dm.steps, init);
    dm.schedule = io::make_schedule(cfg);
    dm.mode = cfg.dm.mode;
  }
  io::JsonLines history(ctx.artifact("dm_history.jsonl"));
  Rng noise = ctx.root.stream(Stream::Noise);
  ctx.log() << "train-dm: " << data.size() << " pairs, " << diffusion::total_epochs(cfg.dm.stages) << " epochs\n";
  const auto losses =
      diffusion::train_dm(dm.net, dm.schedule, dm.mode, data, dm_train_options(ctx, &history), noise);
  io::save_checkpoint(ctx.artifact("dm.ckpt").string(),
                      io::dm_checkpoint(dm.net, dm.schedule, dm.mode, io::to_json(cfg),
                                        {{"seed", cfg.seed}, {"epochs", losses.size()}, {"loss", losses.back()}}));
}

inline e2e::AeTrainOptions ae_train_options(Context& ctx, io::JsonLines& history) {
  e2e::AeTrainOptions o;
  const auto& a = ctx.cfg.ae;
  o.stages = a.stages;
  o.samples_per_epoch = ctx.scaled(a.samples_per_epoch);
  o.batch_size = a.batch_size;
  o.optimizer = a.optimizer;
  o.order = a.order;
  o.on_epoch = [&ctx, &history](const e2e::EpochRecord& r) {
    ctx.log() << "  epoch " << r.epoch << ' ' << r.phase << " loss " << r.loss << '\n';
    history.write({{"epoch", r.epoch}, {"phase", r.phase}, {"loss", r.loss}, {"lr", r.lr}});
  };
  return o;
}

inline void train_ae(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const std::string algorithm = ctx.opts.algorithm.value_or(cfg.ae.algorithm);
  ctx.extra["algorithm"] = algorithm;
  ctx.extra["optimizer_state"] = "separate encoder and decoder optimizer states";
  Rng init = ctx.root.stream(Stream::Init).split(2);
  e2e::Autoencoder<float> ae(cfg.ae.messages, cfg.n, init);
  io::JsonLines history(ctx.artifact("ae_history.jsonl"));
  auto opts = ae_train_options(ctx, history);
  Rng rng = ctx.root.stream(Stream::Noise);
  ctx.log() << "train-ae (" << algorithm << "): M = " << cfg.ae.messages << ", n = " << cfg.n << '\n';

  if (algorithm == "model-aware") {
    e2e::train_model_aware(ae, cfg.channel.model, opts, rng);
  } else if (algorithm == "pretrain" || algorithm == "iterative") {
    io::LoadedDm dm;
    if (ctx.opts.checkpoint) {
      dm = load_dm_for(ctx);
    } else if (algorithm == "iterative") {
      Rng dm_init = ctx.root.stream(Stream::Init);
      dm.net = diffusion::Denoiser<float>(cfg.n, cfg.dm.hidden, cfg.dm.steps, dm_init);
      dm.schedule = io::make_schedule(cfg);
      dm.mode = cfg.dm.mode;
    } else {
      ctx.require_checkpoint("dm");
    }
    e2e::DiffusionChannel<float> channel{&dm.net, dm.schedule, dm.mode,
                                         io::make_plan(cfg.ae.channel_sampler, dm.schedule.steps())};
    if (algorithm == "pretrain") {
      e2e::train_pretrained(ae, channel, opts, rng);
    } else {
      e2e::IterativeOptions it;
      it.alternations = cfg.ae.alternations;
      it.dm_dataset_size = ctx.scaled(cfg.ae.dm_dataset_size);
      io::JsonLines dm_history(ctx.artifact("dm_history.jsonl"));
      it.dm = dm_train_options(ctx, nullptr);
      it.ae = opts;
      const auto h = e2e::train_iterative(ae, channel, cfg.channel.model, it, rng);
      for (std::size_t a = 0; a < h.dm_loss.size(); ++a)
        for (std::size_t e = 0; e < h.dm_loss[a].size(); ++e)
          dm_history.write({{"alternation", a + 1}, {"epoch", e + 1}, {"loss", h.dm_loss[a][e]}});
      io::save_checkpoint(ctx.artifact("dm_iterative.ckpt").string(),
                          io::dm_checkpoint(dm.net, dm.schedule, dm.mode, io::to_json(cfg),
                                            {{"seed", cfg.seed}, {"alternations", it.alternations}}));
    }
  } else {
    throw io::ConfigError("train-ae: unknown algorithm '" + algorithm + "'");
  }
  io::save_checkpoint(ctx.artifact("ae.ckpt").string(),
                      io::ae_checkpoint(ae, io::to_json(cfg), {{"seed", cfg.seed}, {"algorithm", algorithm}}));
}

inline void eval_ser(Context& ctx) {
  const auto& cfg = ctx.cfg;
  auto ae = io::load_ae(io::load_checkpoint(ctx.require_checkpoint("ae").string()));
  io::require_compatible(ae, cfg);
  const auto sweep = e2e::evaluate_ser(ae, cfg.channel.model, cfg.eval.ebn0_db, ctx.scaled(cfg.eval.trials),
                                       ctx.root.stream(Stream::Eval).seed(), cfg.eval.batch, cfg.threads);
  io::CsvWriter csv(ctx.artifact("ser.csv"), {"ebn0_db", "ser", "ci_low", "ci_high", "trials"});
  for (const auto& p : sweep) {
    csv.row({io::format_number(p.ebn0_db), io::format_number(p.ser), io::format_number(p.ci_low),
             io::format_number(p.ci_high), std::to_string(p.trials)});
    ctx.log() << "  " << p.ebn0_db << " dB: SER " << p.ser << " [" << p.ci_low << ", " << p.ci_high << "]\n";
  }
}

inline void eval_swd(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const std::size_t N = ctx.scaled(cfg.eval.swd_samples, 2);
  Rng eval = ctx.root.stream(Stream::Eval);
  const Tensor<float> c = gaussian_conditions(N, cfg.n, eval);
  const Rng truth_rng = eval;
  Rng draw = truth_rng;
  const Tensor<float> truth = channels::apply_channel(cfg.channel.model, c, draw);
  Rng proj_rng = ctx.root.stream(Stream::Projection);
  const auto proj = metrics::make_projections(cfg.n, cfg.eval.swd_projections, proj_rng);
  io::CsvWriter csv(ctx.artifact("swd.csv"), {"schedule", "sampler", "S", "swd"});

  if (!ctx.opts.checkpoint) {
    // Self-check: the truth generator against itself with the same draws.
    Rng again = truth_rng;
    const Tensor<float> second = channels::apply_channel(cfg.channel.model, c, again);
    const double d = metrics::swd(truth, second, proj, cfg.threads);
    csv.row({"truth", "truth", "0", io::format_number(d)});
    ctx.log() << "  truth vs truth: " << d << '\n';
    return;
  }
  auto dm = load_dm_for(ctx);
  const std::uint64_t sample_seed = ctx.root.stream(Stream::Noise).seed();
  const std::string schedule(diffusion::to_string(dm.schedule.kind()));
  std::vector<std::pair<diffusion::Sampler, std::size_t>> rows{{diffusion::Sampler::DDPM, dm.schedule.steps()}};
  for (std::size_t S : cfg.sampler.grid) rows.emplace_back(diffusion::Sampler::DDIM, S);
  for (const auto& [kind, S] : rows) {
    auto plan = diffusion::make_plan(kind, dm.schedule.steps(), S);
    plan.ddpm_deterministic = cfg.sampler.ddpm_deterministic;
    const Tensor<float> gen = diffusion::sample_chunked<float>(dm.schedule, dm.net, dm.mode, plan, c, sample_seed,
                                                               cfg.sampler.chunk, cfg.threads);
    const double d = metrics::swd(gen, truth, proj, cfg.threads);
    csv.row({schedule, std::string(diffusion::to_string(kind)), std::to_string(S), io::format_number(d)});
    ctx.log() << "  " << diffusion::to_string(kind) << "-" << S << ": " << d << '\n';
  }
}

inline void eval_cov(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto* clarke = std::get_if<channels::Clarke>(&cfg.channel.model);
  if (!clarke) throw io::ConfigError("eval-cov: channel.kind must be clarke");
  const std::size_t N = ctx.scaled(cfg.cov.samples, 2);
  Rng rng = ctx.root.stream(Stream::Eval);
  metrics::Generator<float> generator;
  std::optional<io::LoadedDm> dm;
  if (ctx.opts.checkpoint) {
    dm = load_dm_for(ctx);
    const std::uint64_t seed = ctx.root.stream(Stream::Noise).seed();
    auto plan = io::make_plan(cfg.sampler, dm->schedule.steps());
    std::uint64_t call = 0;
    generator = [&, plan, seed, call](const Tensor<float>& x, Rng&) mutable {
      return diffusion::sample_chunked<float>(dm->schedule, dm->net, dm->mode, plan, x, Rng(seed).split(call++).seed(),
                                              cfg.sampler.chunk, cfg.threads);
    };
  } else {
    const auto model = cfg.channel.model;
    generator = [model](const Tensor<float>& x, Rng& r) { return channels::apply_channel(model, x, r); };
  }
  const auto est = metrics::extract_fading_covariance(generator, clarke->n_c, clarke->sigma, N, rng);
  const auto truth = channels::clarke_covariance(clarke->n_c, clarke->fd_ts);
  io::CsvWriter csv(ctx.artifact("cov.csv"), {"i", "j", "re", "im", "truth"});
  for (std::size_t i = 0; i < est.n; ++i)
    for (std::size_t j = 0; j < est.n; ++j)
      csv.row({std::to_string(i), std::to_string(j), io::format_number(est(i, j).real()),
               io::format_number(est(i, j).imag()), io::format_number(truth(i, j))});
  const double mad = metrics::mean_abs_deviation(est, truth);
  io::write_json(ctx.artifact("cov_summary.json"), {{"generator", dm ? "dm" : "channel"},
                 {"n_c", clarke->n_c},
                 {"fd_ts", clarke->fd_ts},
                 {"sigma", clarke->sigma},
                 {"samples", N},
                 {"mean_abs_deviation", mad}});
  ctx.log() << "  mean |cov - J0 profile| = " << mad << '\n';
}

inline void sample(Context& ctx) {
  const auto& cfg = ctx.cfg;
  auto dm = load_dm_for(ctx);
  Tensor<float> c;
  if (ctx.opts.conditions) {
    c = io::read_matrix_csv(*ctx.opts.conditions, cfg.n);
  } else {
    Rng eval = ctx.root.stream(Stream::Eval);
    c = gaussian_conditions(ctx.scaled(cfg.eval.swd_samples), cfg.n, eval);
  }
  const auto plan = io::make_plan(cfg.sampler, dm.schedule.steps());
  const Tensor<float> y = diffusion::sample_chunked<float>(dm.schedule, dm.net, dm.mode, plan, c,
                                                           ctx.root.stream(Stream::Noise).seed(), cfg.sampler.chunk,
                                                           cfg.threads);
  write_pairs(ctx.artifact("samples.csv"), c, y);
  ctx.log() << "sample: wrote " << y.rows() << " samples\n";
}

/// Least-squares line through (x, y); returns slope, intercept and R².
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Median wall-clock milliseconds of `repeats` runs of the sampler.
template <typename Model>
double time_sampling(const diffusion::NoiseSchedule& sched, Model& net, diffusion::PredictionMode mode,
                     const diffusion::SamplingPlan& plan, const Tensor<float>& c, std::size_t repeats,
                     std::uint64_t seed) {
  std::vector<double> ms;
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng(seed);
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor<float> y = diffusion::sample<float>(sched, net, mode, plan, c, rng);
    const auto t1 = std::chrono::steady_clock::now();
    if (!y.all_finite()) throw NumericalError("bench-sampling: non-finite samples");
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  return ms[ms.size() / 2];
}

inline void bench_sampling(Context& ctx) {
  const auto& cfg = ctx.cfg;
  io::LoadedDm dm;
  if (ctx.opts.checkpoint) {
    dm = load_dm_for(ctx);
  } else {
    // Timing does not depend on the weights.
    Rng init = ctx.root.stream(Stream::Init);
    dm.net = diffusion::Denoiser<float>(cfg.n, cfg.dm.hidden, cfg.dm.steps, init);
    dm.schedule = io::make_schedule(cfg);
    dm.mode = cfg.dm.mode;
  }
  Rng eval = ctx.root.stream(Stream::Eval);
  const Tensor<float> c = gaussian_conditions(ctx.scaled(cfg.eval.bench_batch), cfg.n, eval);
  const std::uint64_t seed = ctx.root.stream(Stream::Noise).seed();
  const std::size_t T = dm.schedule.steps();
  std::vector<std::size_t> grid = cfg.sampler.grid;
  if (std::find(grid.begin(), grid.end(), T) == grid.end()) grid.push_back(T);
  std::sort(grid.begin(), grid.end());

  io::CsvWriter csv(ctx.artifact("bench.csv"), {"sampler", "S", "ms"});
  const double ddpm = time_sampling(dm.schedule, dm.net, dm.mode, diffusion::make_plan(diffusion::Sampler::DDPM, T),
                                    c, cfg.eval.bench_repeats, seed);
  csv.row({"ddpm", std::to_string(T), io::format_number(ddpm)});
  std::vector<double> xs, ys;
  double ddim_full = 0.0;
  for (std::size_t S : grid) {
    const double ms = time_sampling(dm.schedule, dm.net, dm.mode,
                                    diffusion::make_plan(diffusion::Sampler::DDIM, T, S), c, cfg.eval.bench_repeats,
                                    seed);
    csv.row({"ddim", std::to_string(S), io::format_number(ms)});
    ctx.log() << "  ddim-" << S << ": " << ms << " ms\n";
    xs.push_back(static_cast<double>(S));
    ys.push_back(ms);
    if (S == T) ddim_full = ms;
  }
  const LineFit fit = fit_line(xs, ys);
  io::write_json(ctx.artifact("bench_summary.json"), {{"batch", c.rows()},
                 {"ddpm_ms", ddpm},
                 {"ddim_full_ms", ddim_full},
                 {"ddim_over_ddpm", ddim_full / ddpm},
                 {"slope_ms_per_step", fit.slope},
                 {"intercept_ms", fit.intercept},
                 {"r2", fit.r2}});
  ctx.log() << "  ddpm-" << T << ": " << ddpm << " ms; ddim fit R^2 = " << fit.r2 << '\n';
}

inline json manifest_json(const Context& ctx, double seconds, const std::string& started) {
  return {{"manifest_version", 1},
          {"command", ctx.opts.command},
          {"seed", ctx.cfg.seed},
          {"scale", ctx.opts.scale},
          {"config", io::to_json(ctx.cfg)},
          {"checkpoint", ctx.opts.checkpoint ? json(ctx.opts.checkpoint->string()) : json(nullptr)},
          {"algorithm", ctx.opts.algorithm ? json(*ctx.opts.algorithm) : json(nullptr)},
          {"conditions", ctx.opts.conditions ? json(ctx.opts.conditions->string()) : json(nullptr)},
          {"git_describe", ctx.opts.build_id},
          {"rng", std::string(Rng::algorithm)},
          {"ebn0_convention", "unit average power per real dimension; R = log2(M)/n; sigma^2 = 1/(2 R Eb/N0) per real "
                              "dimension, doubled per complex symbol for sspa and clarke"},
          {"started_at", started},
          {"wall_seconds", seconds},
          {"artifacts", ctx.artifacts},
          {"details", ctx.extra}};
}

}  // namespace detail

/// Runs one command and writes its artifacts plus manifest.json under opts.out. Returns the exit status.
inline int run(RunOptions opts) {
  if (opts.command == "replay") throw io::ConfigError("replay: use options_from_manifest first");
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), opts.command) == names.end())
    throw io::ConfigError("unknown command '" + opts.command + "'");
  if (opts.scale < 1) throw io::ConfigError("--scale must be >= 1");
  detail::Context ctx{opts, opts.config, Rng(0)};
  if (opts.seed) ctx.cfg.seed = *opts.seed;
  ctx.root = Rng(ctx.cfg.seed);
  fs::create_directories(opts.out);
  const std::string started = io::utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();

  const std::string& c = opts.command;
  if (c == "gen-data") detail::gen_data(ctx);
  else if (c == "train-dm") detail::train_dm(ctx);
  else if (c == "train-ae") detail::train_ae(ctx);
  else if (c == "eval-swd") detail::eval_swd(ctx);
  else if (c == "eval-ser") detail::eval_ser(ctx);
  else if (c == "eval-cov") detail::eval_cov(ctx);
  else if (c == "sample") detail::sample(ctx);
  else if (c == "bench-sampling") detail::bench_sampling(ctx);

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  io::write_json(opts.out / "manifest.json", detail::manifest_json(ctx, seconds, started));
  return 0;
}

}  // namespace dmchan::cli
