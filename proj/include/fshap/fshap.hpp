#pragma once

#include "fshap/codec.hpp"
#include "fshap/error.hpp"
#include "fshap/fusion.hpp"
#include "fshap/game.hpp"
#include "fshap/io.hpp"
#include "fshap/mapping.hpp"
#include "fshap/metrics.hpp"
#include "fshap/model.hpp"
#include "fshap/rng.hpp"
#include "fshap/shapley.hpp"
#include "fshap/tensor.hpp"
