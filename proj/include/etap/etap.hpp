#pragma once

#include "etap/agent.hpp"
#include "etap/cgm_etppo.hpp"
#include "etap/checkpoint.hpp"
#include "etap/config.hpp"
#include "etap/env.hpp"
#include "etap/error.hpp"
#include "etap/harness.hpp"
#include "etap/hetppo.hpp"
#include "etap/meals.hpp"
#include "etap/metrics.hpp"
#include "etap/neural.hpp"
#include "etap/ode.hpp"
#include "etap/patients.hpp"
#include "etap/pid.hpp"
#include "etap/plant.hpp"
#include "etap/ppo.hpp"
#include "etap/rng.hpp"
#include "etap/scenario.hpp"
#include "etap/text.hpp"
#include "etap/trainer.hpp"
