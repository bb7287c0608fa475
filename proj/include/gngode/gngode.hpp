#pragma once

#include "gngode/errors.hpp"
#include "gngode/numeric/array.hpp"
#include "gngode/numeric/sparse.hpp"
#include "gngode/numeric/tape.hpp"
#include "gngode/numeric/adam.hpp"
#include "gngode/numeric/finite_difference.hpp"
#include "gngode/graph/session.hpp"
#include "gngode/graph/session_graph.hpp"
#include "gngode/model/parameters.hpp"
#include "gngode/model/encoder.hpp"
#include "gngode/model/readout.hpp"
#include "gngode/ode/solvers.hpp"
#include "gngode/ode/gng_ode.hpp"
#include "gngode/pipeline/config.hpp"
#include "gngode/pipeline/model.hpp"
#include "gngode/pipeline/checkpoint.hpp"
#include "gngode/pipeline/train.hpp"
#include "gngode/pipeline/evaluate.hpp"
#include "gngode/pipeline/synthetic.hpp"
