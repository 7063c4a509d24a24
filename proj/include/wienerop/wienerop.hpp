#pragma once

#include "wienerop/errors.hpp"
#include "wienerop/grid.hpp"
#include "wienerop/kernel.hpp"
#include "wienerop/kernel_zoo.hpp"
#include "wienerop/operator.hpp"
#include "wienerop/rng.hpp"
#include "wienerop/statistics.hpp"
#include "wienerop/stochastic.hpp"
#include "wienerop/scenarios.hpp"
#include "wienerop/report.hpp"
#include "wienerop/config.hpp"
#include "wienerop/runner.hpp"
