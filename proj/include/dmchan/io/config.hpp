#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmchan/channels/channel.hpp"
#include "dmchan/diffusion/sampler.hpp"
#include "dmchan/diffusion/train.hpp"
#include "dmchan/e2e/train.hpp"

namespace dmchan::io {

using json = nlohmann::json;

/// Invalid configuration; the message names the offending field.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ChannelSpec {
  channels::ChannelModel model = channels::Awgn{0.3};
  std::optional<double> ebn0_db;  ///< when set, σ is derived from it
};

struct DmSpec {
  std::size_t hidden = 64;
  std::size_t steps = 100;
  diffusion::ScheduleKind schedule = diffusion::ScheduleKind::Cosine;
  diffusion::ScheduleParams schedule_params;
  diffusion::PredictionMode mode = diffusion::PredictionMode::V;
  std::size_t dataset_size = 100000;
  std::size_t batch_size = 100;
  nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
  std::vector<diffusion::LrStage> stages{{1e-3, 10}};
};

struct SamplerSpec {
  diffusion::Sampler kind = diffusion::Sampler::DDPM;
  std::size_t steps = 0;  ///< S for DDIM; 0 means T
  std::vector<std::size_t> grid{100, 50, 20, 10, 5, 2};
  bool ddpm_deterministic = false;
  std::size_t chunk = 4096;
};

struct AeSpec {
  std::size_t messages = 4;
  std::string algorithm = "pretrain";  ///< pretrain | iterative | model-aware
  std::size_t samples_per_epoch = 20000;
  std::size_t batch_size = 100;
  nn::OptimizerKind optimizer = nn::OptimizerKind::NAdam;
  e2e::UpdateOrder order = e2e::UpdateOrder::Joint;
  std::vector<diffusion::LrStage> stages{{1e-2, 2}, {1e-3, 3}};
  std::size_t alternations = 10;
  std::size_t dm_dataset_size = 100000;
  SamplerSpec channel_sampler;  ///< how the DM generates channel outputs during AE training
};

struct EvalSpec {
  std::vector<double> ebn0_db{0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::size_t trials = 100000;
  std::size_t batch = 10000;
  std::size_t swd_samples = 10000;
  std::size_t swd_projections = 128;
  std::size_t bench_batch = 1000;
  std::size_t bench_repeats = 3;
};

struct CovSpec {
  std::size_t samples = 100000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t n = 2;
  unsigned threads = 1;
  ChannelSpec channel;
  DmSpec dm;
  SamplerSpec sampler;
  AeSpec ae;
  EvalSpec eval;
  CovSpec cov;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config: " + field + ": " + what);
}

inline const json* find(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <typename V>
void read(const json& j, const char* key, const std::string& path, V& out) {
  const json* v = find(j, key);
  if (!v) return;
  try {
    out = v->get<V>();
  } catch (const json::exception& e) {
    fail(path + key, std::string("wrong type (") + e.what() + ")");
  }
}

inline void read_count(const json& j, const char* key, const std::string& path, std::size_t& out,
                       std::size_t min = 1) {
  const json* v = find(j, key);
  if (!v) return;
  if (!v->is_number_integer() || v->get<long long>() < static_cast<long long>(min))
    fail(path + key, "must be an integer >= " + std::to_string(min));
  out = v->get<std::size_t>();
}

template <typename E, typename F>
void read_enum(const json& j, const char* key, const std::string& path, E& out, F parse) {
  const json* v = find(j, key);
  if (!v) return;
  if (!v->is_string()) fail(path + key, "must be a string");
  try {
    out = parse(v->get<std::string>());
  } catch (const std::invalid_argument& e) {
    fail(path + key, e.what());
  }
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (j.is_null()) return;
  if (!j.is_object()) fail(path.empty() ? "<root>" : path.substr(0, path.size() - 1), "must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) fail(path + it.key(), "unknown field");
  }
}

inline std::vector<diffusion::LrStage> read_stages(const json& j, const char* key, const std::string& path,
                                                   std::vector<diffusion::LrStage> fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_array() || v->empty()) fail(path + key, "must be a non-empty array of {lr, epochs}");
  std::vector<diffusion::LrStage> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const json& s = (*v)[i];
    const std::string p = path + key + "[" + std::to_string(i) + "].";
    check_keys(s, p, {"lr", "epochs"});
    diffusion::LrStage st;
    read(s, "lr", p, st.lr);
    read_count(s, "epochs", p, st.epochs);
    if (!(st.lr > 0.0)) fail(p + "lr", "must be > 0");
    out.push_back(st);
  }
  return out;
}

inline json stages_json(const std::vector<diffusion::LrStage>& stages) {
  json a = json::array();
  for (const auto& s : stages) a.push_back({{"lr", s.lr}, {"epochs", s.epochs}});
  return a;
}

inline void read_sampler(const json& j, const std::string& path, SamplerSpec& s) {
  check_keys(j, path, {"kind", "steps", "grid", "ddpm_deterministic", "chunk"});
  read_enum(j, "kind", path, s.kind, diffusion::sampler_from_string);
  read_count(j, "steps", path, s.steps, 0);
  read(j, "ddpm_deterministic", path, s.ddpm_deterministic);
  read_count(j, "chunk", path, s.chunk);
  if (const json* g = find(j, "grid")) {
    if (!g->is_array() || g->empty()) fail(path + "grid", "must be a non-empty array of step counts");
    s.grid.clear();
    for (const auto& v : *g) {
      if (!v.is_number_integer() || v.get<long long>() < 1) fail(path + "grid", "entries must be integers >= 1");
      s.grid.push_back(v.get<std::size_t>());
    }
  }
}

inline json sampler_json(const SamplerSpec& s) {
  return {{"kind", std::string(diffusion::to_string(s.kind))},
          {"steps", s.steps},
          {"grid", s.grid},
          {"ddpm_deterministic", s.ddpm_deterministic},
          {"chunk", s.chunk}};
}

}  // namespace detail

/// Parses and validates a config document; unspecified fields keep their defaults.
inline ExperimentConfig parse_config(const json& j) {
  using namespace detail;
  ExperimentConfig c;
  check_keys(j, "", {"seed", "n", "threads", "channel", "dm", "sampler", "ae", "eval", "cov"});
  read(j, "seed", "", c.seed);
  read_count(j, "n", "", c.n);
  read(j, "threads", "", c.threads);

  // ae first: the channel σ may depend on M.
  if (const json* a = find(j, "ae")) {
    const std::string p = "ae.";
    check_keys(*a, p,
               {"M", "algorithm", "samples_per_epoch", "batch_size", "optimizer", "order", "stages", "alternations",
                "dm_dataset_size", "channel_sampler"});
    read_count(*a, "M", p, c.ae.messages, 2);
    read(*a, "algorithm", p, c.ae.algorithm);
    if (c.ae.algorithm != "pretrain" && c.ae.algorithm != "iterative" && c.ae.algorithm != "model-aware")
      fail(p + "algorithm", "must be one of pretrain, iterative, model-aware");
    read_count(*a, "samples_per_epoch", p, c.ae.samples_per_epoch);
    read_count(*a, "batch_size", p, c.ae.batch_size);
    read_enum(*a, "optimizer", p, c.ae.optimizer, nn::optimizer_from_string);
    read_enum(*a, "order", p, c.ae.order, e2e::update_order_from_string);
    c.ae.stages = read_stages(*a, "stages", p, c.ae.stages);
    read_count(*a, "alternations", p, c.ae.alternations, 0);
    read_count(*a, "dm_dataset_size", p, c.ae.dm_dataset_size);
    if (const json* s = find(*a, "channel_sampler")) read_sampler(*s, p + "channel_sampler.", c.ae.channel_sampler);
  }
  if (c.ae.algorithm == "iterative" && c.ae.alternations < 1)
    fail("ae.alternations", "iterative training needs at least one alternation");

  if (const json* ch = find(j, "channel")) {
    const std::string p = "channel.";
    check_keys(*ch, p, {"kind", "sigma", "ebn0_db", "sigma_r", "p", "a0", "v0", "n_c", "fd_ts"});
    std::string kind = "awgn";
    read(*ch, "kind", p, kind);
    double sigma = 0.3;
    read(*ch, "sigma", p, sigma);
    if (kind == "awgn") {
      c.channel.model = channels::Awgn{sigma};
    } else if (kind == "rayleigh") {
      channels::Rayleigh r{1.0, sigma};
      read(*ch, "sigma_r", p, r.sigma_r);
      c.channel.model = r;
    } else if (kind == "sspa") {
      channels::Sspa s;
      s.sigma = sigma;
      s.n_c = c.n / 2;
      read(*ch, "p", p, s.p);
      read(*ch, "a0", p, s.a0);
      read(*ch, "v0", p, s.v0);
      read_count(*ch, "n_c", p, s.n_c);
      c.channel.model = s;
    } else if (kind == "clarke") {
      channels::Clarke k;
      k.sigma = sigma;
      k.n_c = c.n / 2;
      read(*ch, "fd_ts", p, k.fd_ts);
      read_count(*ch, "n_c", p, k.n_c);
      c.channel.model = k;
    } else {
      fail(p + "kind", "must be one of awgn, rayleigh, sspa, clarke");
    }
    if (const json* e = find(*ch, "ebn0_db"); e && !e->is_null()) {
      if (!e->is_number()) fail(p + "ebn0_db", "must be a number");
      c.channel.ebn0_db = e->get<double>();
    }
  }
  if (c.channel.ebn0_db)
    c.channel.model = channels::with_sigma(
        c.channel.model, channels::model_sigma_for_ebn0(c.channel.model, *c.channel.ebn0_db, c.ae.messages, c.n));
  try {
    channels::validate(c.channel.model);
  } catch (const std::invalid_argument& e) {
    fail("channel", e.what());
  }
  if (const std::size_t need = channels::required_dim(c.channel.model); need != 0 && need != c.n)
    fail("n", "must equal 2*channel.n_c = " + std::to_string(need) + " for " + channels::channel_name(c.channel.model));

  if (const json* d = find(j, "dm")) {
    const std::string p = "dm.";
    check_keys(*d, p,
               {"hidden", "steps", "schedule", "beta", "sigmoid_offset", "sigmoid_scale", "cosine_clamp", "variance",
                "mode", "dataset_size", "batch_size", "optimizer", "stages"});
    read_count(*d, "hidden", p, c.dm.hidden);
    read_count(*d, "steps", p, c.dm.steps);
    read_enum(*d, "schedule", p, c.dm.schedule, diffusion::schedule_from_string);
    if (c.dm.schedule == diffusion::ScheduleKind::Custom) fail(p + "schedule", "custom schedules cannot be configured");
    read(*d, "beta", p, c.dm.schedule_params.beta);
    read(*d, "sigmoid_offset", p, c.dm.schedule_params.sigmoid_offset);
    read(*d, "sigmoid_scale", p, c.dm.schedule_params.sigmoid_scale);
    read(*d, "cosine_clamp", p, c.dm.schedule_params.cosine_clamp);
    std::string variance = "posterior";
    read(*d, "variance", p, variance);
    if (variance == "posterior") {
      c.dm.schedule_params.variance = diffusion::DdpmVariance::Posterior;
    } else if (variance == "beta") {
      c.dm.schedule_params.variance = diffusion::DdpmVariance::Beta;
    } else {
      fail(p + "variance", "must be posterior or beta");
    }
    read_enum(*d, "mode", p, c.dm.mode, diffusion::mode_from_string);
    read_count(*d, "dataset_size", p, c.dm.dataset_size);
    read_count(*d, "batch_size", p, c.dm.batch_size);
    read_enum(*d, "optimizer", p, c.dm.optimizer, nn::optimizer_from_string);
    c.dm.stages = read_stages(*d, "stages", p, c.dm.stages);
  }
  if (c.dm.schedule == diffusion::ScheduleKind::Cosine && c.dm.mode == diffusion::PredictionMode::Epsilon)
    fail("dm.mode", "the cosine schedule reaches zero SNR and requires v prediction");

  if (const json* s = find(j, "sampler")) read_sampler(*s, "sampler.", c.sampler);
  for (const auto& [s, p] : {std::pair{&c.sampler, "sampler."}, std::pair{&c.ae.channel_sampler, "ae.channel_sampler."}}) {
    if (s->steps > c.dm.steps) fail(std::string(p) + "steps", "exceeds dm.steps");
    for (std::size_t S : s->grid)
      if (S > c.dm.steps) fail(std::string(p) + "grid", "entry " + std::to_string(S) + " exceeds dm.steps");
  }

  if (const json* e = find(j, "eval")) {
    const std::string p = "eval.";
    check_keys(*e, p,
               {"ebn0_db", "trials", "batch", "swd_samples", "swd_projections", "bench_batch", "bench_repeats"});
    read(*e, "ebn0_db", p, c.eval.ebn0_db);
    if (c.eval.ebn0_db.empty()) fail(p + "ebn0_db", "must list at least one point");
    read_count(*e, "trials", p, c.eval.trials);
    read_count(*e, "batch", p, c.eval.batch);
    read_count(*e, "swd_samples", p, c.eval.swd_samples, 2);
    read_count(*e, "swd_projections", p, c.eval.swd_projections);
    read_count(*e, "bench_batch", p, c.eval.bench_batch);
    read_count(*e, "bench_repeats", p, c.eval.bench_repeats);
  }
  if (const json* v = find(j, "cov")) {
    check_keys(*v, "cov.", {"samples"});
    read_count(*v, "samples", "cov.", c.cov.samples, 2);
  }
  return c;
}

/// Full echo of a config with every default filled in; parse_config(to_json(c)) reproduces c.
inline json to_json(const ExperimentConfig& c) {
  using detail::sampler_json;
  using detail::stages_json;
  json ch = {{"kind", channels::channel_name(c.channel.model)}, {"sigma", channels::noise_sigma(c.channel.model)}};
  if (const auto* r = std::get_if<channels::Rayleigh>(&c.channel.model)) ch["sigma_r"] = r->sigma_r;
  if (const auto* s = std::get_if<channels::Sspa>(&c.channel.model)) {
    ch["p"] = s->p;
    ch["a0"] = s->a0;
    ch["v0"] = s->v0;
    ch["n_c"] = s->n_c;
  }
  if (const auto* k = std::get_if<channels::Clarke>(&c.channel.model)) {
    ch["fd_ts"] = k->fd_ts;
    ch["n_c"] = k->n_c;
  }
  if (c.channel.ebn0_db) ch["ebn0_db"] = *c.channel.ebn0_db;
  const auto& sp = c.dm.schedule_params;
  return {
      {"seed", c.seed},
      {"n", c.n},
      {"threads", c.threads},
      {"channel", ch},
      {"dm",
       {{"hidden", c.dm.hidden},
        {"steps", c.dm.steps},
        {"schedule", std::string(diffusion::to_string(c.dm.schedule))},
        {"beta", sp.beta},
        {"sigmoid_offset", sp.sigmoid_offset},
        {"sigmoid_scale", sp.sigmoid_scale},
        {"cosine_clamp", sp.cosine_clamp},
        {"variance", sp.variance == diffusion::DdpmVariance::Posterior ? "posterior" : "beta"},
        {"mode", std::string(diffusion::to_string(c.dm.mode))},
        {"dataset_size", c.dm.dataset_size},
        {"batch_size", c.dm.batch_size},
        {"optimizer", std::string(nn::to_string(c.dm.optimizer))},
        {"stages", stages_json(c.dm.stages)}}},
      {"sampler", sampler_json(c.sampler)},
      {"ae",
       {{"M", c.ae.messages},
        {"algorithm", c.ae.algorithm},
        {"samples_per_epoch", c.ae.samples_per_epoch},
        {"batch_size", c.ae.batch_size},
        {"optimizer", std::string(nn::to_string(c.ae.optimizer))},
        {"order", std::string(e2e::to_string(c.ae.order))},
        {"stages", stages_json(c.ae.stages)},
        {"alternations", c.ae.alternations},
        {"dm_dataset_size", c.ae.dm_dataset_size},
        {"channel_sampler", sampler_json(c.ae.channel_sampler)}}},
      {"eval",
       {{"ebn0_db", c.eval.ebn0_db},
        {"trials", c.eval.trials},
        {"batch", c.eval.batch},
        {"swd_samples", c.eval.swd_samples},
        {"swd_projections", c.eval.swd_projections},
        {"bench_batch", c.eval.bench_batch},
        {"bench_repeats", c.eval.bench_repeats}}},
      {"cov", {{"samples", c.cov.samples}}},
  };
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

/// Schedule and sampling plan described by a config.
inline diffusion::NoiseSchedule make_schedule(const ExperimentConfig& c) {
  return diffusion::make_schedule(c.dm.schedule, c.dm.steps, c.dm.schedule_params);
}

inline diffusion::SamplingPlan make_plan(const SamplerSpec& s, std::size_t T) {
  diffusion::SamplingPlan plan = diffusion::make_plan(s.kind, T, s.steps == 0 ? T : s.steps);
  plan.ddpm_deterministic = s.ddpm_deterministic;
  return plan;
}

}  // namespace dmchan::io
