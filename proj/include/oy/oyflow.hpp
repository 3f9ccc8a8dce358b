#pragma once

// Umbrella header.
#include "oy/config.hpp"
#include "oy/dynamics.hpp"
#include "oy/equilibrium.hpp"
#include "oy/experiments.hpp"
#include "oy/parallel.hpp"
#include "oy/potential.hpp"
#include "oy/pseudo_gibbs.hpp"
#include "oy/rng.hpp"
#include "oy/run.hpp"
#include "oy/sensitivity.hpp"
#include "oy/stats.hpp"
#include "oy/version.hpp"
