#pragma once

#include <string>
#include <vector>

#include "dmchan/diffusion/denoiser.hpp"
#include "dmchan/diffusion/schedule.hpp"
#include "dmchan/e2e/autoencoder.hpp"
#include "dmchan/io/checkpoint.hpp"
#include "dmchan/io/config.hpp"

namespace dmchan::io {

inline std::vector<NamedArray> export_parameters(const std::vector<const nn::Parameter<float>*>& params) {
  std::vector<NamedArray> out;
  for (const auto* p : params) out.push_back({p->name(), p->value().shape(), p->value().vec()});
  return out;
}

/// Copies every named array into the matching parameter; shapes must agree.
inline void import_parameters(const Checkpoint& ck, const std::vector<nn::Parameter<float>*>& params) {
  if (ck.arrays.size() != params.size())
    throw CheckpointError("checkpoint: expected " + std::to_string(params.size()) + " arrays, found " +
                          std::to_string(ck.arrays.size()));
  for (auto* p : params) {
    const NamedArray& a = ck.array(p->name());
    if (a.shape != p->value().shape())
      throw CheckpointError("checkpoint: array '" + a.name + "' has shape " + nn::shape_string(a.shape) +
                            ", model expects " + nn::shape_string(p->value().shape()));
    p->set_value(nn::Tensor<float>(a.shape, a.data));
  }
}

struct LoadedDm {
  diffusion::Denoiser<float> net;
  diffusion::NoiseSchedule schedule;
  diffusion::PredictionMode mode = diffusion::PredictionMode::V;
};

inline json schedule_json(const diffusion::NoiseSchedule& s) {
  const auto& p = s.params();
  return {{"kind", std::string(diffusion::to_string(s.kind()))},
          {"beta", p.beta},
          {"sigmoid_offset", p.sigmoid_offset},
          {"sigmoid_scale", p.sigmoid_scale},
          {"cosine_clamp", p.cosine_clamp},
          {"variance", p.variance == diffusion::DdpmVariance::Posterior ? "posterior" : "beta"},
          {"betas", s.betas()}};
}

inline Checkpoint dm_checkpoint(const diffusion::Denoiser<float>& net, const diffusion::NoiseSchedule& sched,
                                diffusion::PredictionMode mode, const json& experiment, json metadata) {
  Checkpoint ck;
  ck.kind = "dm";
  ck.config = {{"n", net.dim()},
               {"hidden", net.hidden()},
               {"steps", net.steps()},
               {"mode", std::string(diffusion::to_string(mode))},
               {"schedule", schedule_json(sched)},
               {"experiment", experiment}};
  ck.metadata = std::move(metadata);
  ck.arrays = export_parameters(net.parameters());
  return ck;
}

inline LoadedDm load_dm(const Checkpoint& ck) {
  if (ck.kind != "dm") throw CheckpointError("checkpoint: expected a dm checkpoint, got '" + ck.kind + "'");
  try {
    const json& c = ck.config;
    const json& s = c.at("schedule");
    diffusion::ScheduleParams params;
    params.beta = s.at("beta").get<double>();
    params.sigmoid_offset = s.at("sigmoid_offset").get<double>();
    params.sigmoid_scale = s.at("sigmoid_scale").get<double>();
    params.cosine_clamp = s.at("cosine_clamp").get<double>();
    params.variance = s.at("variance").get<std::string>() == "beta" ? diffusion::DdpmVariance::Beta
                                                                    : diffusion::DdpmVariance::Posterior;
    LoadedDm dm;
    dm.schedule = diffusion::NoiseSchedule::from_betas(
        s.at("betas").get<std::vector<double>>(), diffusion::schedule_from_string(s.at("kind").get<std::string>()),
        params);
    dm.mode = diffusion::mode_from_string(c.at("mode").get<std::string>());
    nn::Rng unused(0);
    dm.net = diffusion::Denoiser<float>(c.at("n").get<std::size_t>(), c.at("hidden").get<std::size_t>(),
                                        c.at("steps").get<std::size_t>(), unused);
    if (dm.schedule.steps() != dm.net.steps()) throw CheckpointError("checkpoint: schedule length differs from T");
    import_parameters(ck, dm.net.parameters());
    return dm;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: incomplete dm config echo: ") + e.what());
  }
}

/// Aborts when a DM checkpoint does not fit the structure the config asks for.
inline void require_compatible(const LoadedDm& dm, const ExperimentConfig& c) {
  auto mismatch = [](const std::string& what, const std::string& have, const std::string& want) {
    throw CheckpointError("checkpoint/config mismatch: " + what + " is " + have + " in the checkpoint but " + want +
                          " in the config");
  };
  if (dm.net.dim() != c.n) mismatch("n", std::to_string(dm.net.dim()), std::to_string(c.n));
  if (dm.net.hidden() != c.dm.hidden) mismatch("dm.hidden", std::to_string(dm.net.hidden()), std::to_string(c.dm.hidden));
  if (dm.net.steps() != c.dm.steps) mismatch("dm.steps", std::to_string(dm.net.steps()), std::to_string(c.dm.steps));
  if (dm.mode != c.dm.mode)
    mismatch("dm.mode", std::string(diffusion::to_string(dm.mode)), std::string(diffusion::to_string(c.dm.mode)));
  if (dm.schedule.kind() != c.dm.schedule)
    mismatch("dm.schedule", std::string(diffusion::to_string(dm.schedule.kind())),
             std::string(diffusion::to_string(c.dm.schedule)));
}

inline Checkpoint ae_checkpoint(const e2e::Autoencoder<float>& ae, const json& experiment, json metadata) {
  Checkpoint ck;
  ck.kind = "ae";
  ck.config = {{"M", ae.messages()}, {"n", ae.dim()}, {"experiment", experiment}};
  ck.metadata = std::move(metadata);
  ck.arrays = export_parameters(ae.parameters());
  return ck;
}

inline e2e::Autoencoder<float> load_ae(const Checkpoint& ck) {
  if (ck.kind != "ae") throw CheckpointError("checkpoint: expected an ae checkpoint, got '" + ck.kind + "'");
  try {
    nn::Rng unused(0);
    e2e::Autoencoder<float> ae(ck.config.at("M").get<std::size_t>(), ck.config.at("n").get<std::size_t>(), unused);
    import_parameters(ck, ae.parameters());
    return ae;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: incomplete ae config echo: ") + e.what());
  }
}

inline void require_compatible(const e2e::Autoencoder<float>& ae, const ExperimentConfig& c) {
  if (ae.dim() != c.n || ae.messages() != c.ae.messages)
    throw CheckpointError("checkpoint/config mismatch: autoencoder is (M = " + std::to_string(ae.messages()) +
                          ", n = " + std::to_string(ae.dim()) + ") but the config asks for (M = " +
                          std::to_string(c.ae.messages) + ", n = " + std::to_string(c.n) + ")");
}

}  // namespace dmchan::io
