#pragma once

#include "hslab/bubble.hpp"
#include "hslab/cutoff.hpp"
#include "hslab/errors.hpp"
#include "hslab/geometry.hpp"
#include "hslab/green_mass.hpp"
#include "hslab/io.hpp"
#include "hslab/parallel.hpp"
#include "hslab/quadrature.hpp"
#include "hslab/radial_fv.hpp"
#include "hslab/special_math.hpp"
#include "hslab/subcritical.hpp"
#include "hslab/test_functions.hpp"
