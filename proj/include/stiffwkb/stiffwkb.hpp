#pragma once

#include "banded.hpp"
#include "chebyshev.hpp"
#include "coeffs.hpp"
#include "eigensolver.hpp"
#include "error.hpp"
#include "fem.hpp"
#include "jet.hpp"
#include "linalg.hpp"
#include "lowfreq.hpp"
#include "quadrature.hpp"
#include "verify.hpp"
#include "wkb.hpp"
