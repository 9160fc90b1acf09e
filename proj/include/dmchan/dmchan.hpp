#pragma once

#include "dmchan/nn/layers.hpp"
#include "dmchan/nn/ops.hpp"
#include "dmchan/nn/optim.hpp"
#include "dmchan/nn/rng.hpp"
#include "dmchan/nn/tape.hpp"
#include "dmchan/nn/tensor.hpp"

#include "dmchan/channels/bessel.hpp"
#include "dmchan/channels/channel.hpp"

#include "dmchan/diffusion/denoiser.hpp"
#include "dmchan/diffusion/process.hpp"
#include "dmchan/diffusion/sampler.hpp"
#include "dmchan/diffusion/schedule.hpp"
#include "dmchan/diffusion/train.hpp"

#include "dmchan/e2e/autoencoder.hpp"
#include "dmchan/e2e/train.hpp"

#include "dmchan/metrics/covariance.hpp"
#include "dmchan/metrics/ecdf.hpp"
#include "dmchan/metrics/swd.hpp"

#include "dmchan/io/checkpoint.hpp"
#include "dmchan/io/config.hpp"
#include "dmchan/io/models.hpp"
#include "dmchan/io/results.hpp"

#include "dmchan/cli/commands.hpp"
