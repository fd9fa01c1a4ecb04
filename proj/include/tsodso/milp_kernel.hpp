#pragma once

#include "tsodso/milp/branch_and_bound.hpp"
#include "tsodso/milp/model.hpp"
#include "tsodso/milp/mps.hpp"
#include "tsodso/milp/simplex.hpp"
