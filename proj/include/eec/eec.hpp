#pragma once

// Umbrella header for the numerical library (the CLI lives in eec/cli.hpp).

#include "eec/asymptotics.hpp"
#include "eec/classify.hpp"
#include "eec/errors.hpp"
#include "eec/estimate.hpp"
#include "eec/gauss.hpp"
#include "eec/kacrice.hpp"
#include "eec/model.hpp"
#include "eec/model_io.hpp"
#include "eec/montecarlo.hpp"
#include "eec/normal.hpp"
#include "eec/parallel.hpp"
#include "eec/quadrature.hpp"
#include "eec/tolerances.hpp"
#include "eec/validate.hpp"
