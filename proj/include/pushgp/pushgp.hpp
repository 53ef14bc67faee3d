#pragma once

#include "pushgp/errors.hpp"
#include "pushgp/kernels.hpp"
#include "pushgp/optim.hpp"
#include "pushgp/standardize.hpp"
#include "pushgp/gp.hpp"
#include "pushgp/vhgp.hpp"
#include "pushgp/push_types.hpp"
#include "pushgp/pushmodel.hpp"
#include "pushgp/data.hpp"
#include "pushgp/metrics.hpp"
#include "pushgp/model_set.hpp"
#include "pushgp/experiments.hpp"
