#pragma once

#include "mfrl/baselines.hpp"
#include "mfrl/channel.hpp"
#include "mfrl/config.hpp"
#include "mfrl/env.hpp"
#include "mfrl/experiment.hpp"
#include "mfrl/fed.hpp"
#include "mfrl/meta.hpp"
#include "mfrl/net.hpp"
#include "mfrl/pipeline.hpp"
#include "mfrl/ppo.hpp"
#include "mfrl/rollout.hpp"
