#pragma once

#include "relaysec/linalg.hpp"
#include "relaysec/random.hpp"
#include "relaysec/sysmodel.hpp"
#include "relaysec/conic.hpp"
#include "relaysec/subproblem.hpp"
#include "relaysec/alternating.hpp"
#include "relaysec/rounding.hpp"
#include "relaysec/pipeline.hpp"
