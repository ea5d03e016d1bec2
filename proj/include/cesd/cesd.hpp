#pragma once

#include "cesd/adam.hpp"
#include "cesd/agent.hpp"
#include "cesd/baselines.hpp"
#include "cesd/checkpoint.hpp"
#include "cesd/config.hpp"
#include "cesd/env.hpp"
#include "cesd/io.hpp"
#include "cesd/metrics.hpp"
#include "cesd/mlp.hpp"
#include "cesd/plot.hpp"
#include "cesd/proto.hpp"
#include "cesd/replay_buffer.hpp"
#include "cesd/reward.hpp"
#include "cesd/theory.hpp"
#include "cesd/trainer.hpp"
