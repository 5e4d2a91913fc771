#pragma once

#include "demixkit/atoms.hpp"
#include "demixkit/core.hpp"
#include "demixkit/demos.hpp"
#include "demixkit/doa.hpp"
#include "demixkit/geometry.hpp"
#include "demixkit/operators.hpp"
#include "demixkit/parallel.hpp"
#include "demixkit/phase_diagram.hpp"
#include "demixkit/rng.hpp"
#include "demixkit/solvers.hpp"
