#pragma once

#include "npnce/dataset.hpp"
#include "npnce/effects.hpp"
#include "npnce/error.hpp"
#include "npnce/experiment.hpp"
#include "npnce/graph.hpp"
#include "npnce/graph_io.hpp"
#include "npnce/marginals.hpp"
#include "npnce/normal.hpp"
#include "npnce/regression.hpp"
#include "npnce/rpc.hpp"
#include "npnce/series.hpp"
#include "npnce/simulate.hpp"
