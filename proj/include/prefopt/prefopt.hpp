#pragma once

// Umbrella header for the preference-robustness laboratory.

#include "checks.hpp"
#include "cli.hpp"
#include "config.hpp"
#include "core.hpp"
#include "experiments.hpp"
#include "losses.hpp"
#include "numeric.hpp"
#include "policy.hpp"
#include "prefgen.hpp"
#include "rng.hpp"
#include "robust.hpp"
#include "train.hpp"
