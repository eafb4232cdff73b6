#pragma once

// ARCH(p) estimation toolkit: closed-form LS and estimating-function fits,
// Gaussian QML and Student-t ML, asymptotic covariances, stationarity and
// moment diagnostics, influence functions, and a Monte Carlo harness.

#include "archfit/diagnostics.hpp"
#include "archfit/errors.hpp"
#include "archfit/estimators.hpp"
#include "archfit/influence.hpp"
#include "archfit/io.hpp"
#include "archfit/model.hpp"
#include "archfit/montecarlo.hpp"
#include "archfit/optim.hpp"
#include "archfit/rng.hpp"
