#pragma once

#include "llcs/vec.hpp"
#include "llcs/space.hpp"
#include "llcs/density.hpp"
#include "llcs/quadrature.hpp"
#include "llcs/rng.hpp"
#include "llcs/ansatz.hpp"
#include "llcs/sampler.hpp"
#include "llcs/conditions.hpp"
#include "llcs/functionals.hpp"
#include "llcs/optimizer.hpp"
#include "llcs/oracle.hpp"
#include "llcs/config.hpp"
#include "llcs/runner.hpp"
