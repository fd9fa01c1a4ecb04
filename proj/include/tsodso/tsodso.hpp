#pragma once

#include "tsodso/model_core.hpp"
#include "tsodso/strategy.hpp"
#include "tsodso/market_clearing.hpp"
#include "tsodso/milp/model.hpp"
#include "tsodso/milp/branch_and_bound.hpp"
#include "tsodso/milp/mps.hpp"
#include "tsodso/mpec_builder.hpp"
#include "tsodso/oracle.hpp"
#include "tsodso/equilibrium.hpp"
#include "tsodso/case_io.hpp"
