#pragma once

#include "carerl/agents.hpp"
#include "carerl/domain.hpp"
#include "carerl/event_log.hpp"
#include "carerl/mdp.hpp"
#include "carerl/preprocess.hpp"
#include "carerl/report.hpp"
#include "carerl/rng.hpp"
#include "carerl/rollout.hpp"
#include "carerl/stats.hpp"
#include "carerl/synth.hpp"
#include "carerl/tune.hpp"
