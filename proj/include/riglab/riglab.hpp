#pragma once

// Umbrella header for the rigged-space operator laboratory.

#include "riglab/adjoint.hpp"
#include "riglab/approx.hpp"
#include "riglab/basis.hpp"
#include "riglab/experiment.hpp"
#include "riglab/matfun.hpp"
#include "riglab/norms.hpp"
#include "riglab/report.hpp"
#include "riglab/rigging.hpp"
#include "riglab/rng.hpp"
