#pragma once

#include "sublin/conditions.hpp"
#include "sublin/core.hpp"
#include "sublin/energy.hpp"
#include "sublin/estimates.hpp"
#include "sublin/fftconv.hpp"
#include "sublin/io.hpp"
#include "sublin/kernels.hpp"
#include "sublin/lorentz.hpp"
#include "sublin/oracle.hpp"
#include "sublin/potentials.hpp"
#include "sublin/rational.hpp"
#include "sublin/solver.hpp"
