#pragma once

#include "mcpe/bench.hpp"
#include "mcpe/error.hpp"
#include "mcpe/features.hpp"
#include "mcpe/io.hpp"
#include "mcpe/linalg.hpp"
#include "mcpe/ls_mcmi.hpp"
#include "mcpe/lstd.hpp"
#include "mcpe/max_likelihood.hpp"
#include "mcpe/mc_inverse.hpp"
#include "mcpe/mcmi.hpp"
#include "mcpe/mrp.hpp"
#include "mcpe/procedural.hpp"
#include "mcpe/rng.hpp"
#include "mcpe/sampling.hpp"
#include "mcpe/td_lambda.hpp"
#include "mcpe/value_vector.hpp"
