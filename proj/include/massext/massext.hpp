#pragma once

#include "massext/branch.hpp"
#include "massext/criticality.hpp"
#include "massext/engine.hpp"
#include "massext/errors.hpp"
#include "massext/model.hpp"
#include "massext/oracles.hpp"
#include "massext/parallel.hpp"
#include "massext/rng.hpp"
#include "massext/stats.hpp"
