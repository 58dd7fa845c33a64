#pragma once

#include "brownian.hpp"
#include "effective_flux.hpp"
#include "error.hpp"
#include "fv_engine.hpp"
#include "homogenization_lab.hpp"
#include "kinetic.hpp"
#include "model_catalog.hpp"
#include "models.hpp"
#include "numeric.hpp"
#include "stats.hpp"
#include "verification.hpp"
