#pragma once
// Umbrella header.

#include "adam.hpp"
#include "admm.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "layers.hpp"
#include "loss.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "report.hpp"
#include "signal.hpp"
#include "train.hpp"
#include "verify.hpp"
#include "wnfg.hpp"
