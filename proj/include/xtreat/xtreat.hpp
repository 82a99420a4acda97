#pragma once

// Extreme quantile and average treatment effects for continuous treatments:
// kernel-weighted counterfactual survival curves, tail-index estimation and
// extrapolation, simultaneous confidence bands, tuning, simulation designs,
// and heavy-tail diagnostics.

#include "core.hpp"
#include "diagnostics.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "sim.hpp"
#include "survival.hpp"
#include "tail.hpp"
#include "tuning.hpp"
#include "weights.hpp"
