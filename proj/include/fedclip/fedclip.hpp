#pragma once

// Umbrella header for the federated clipped-optimization simulation engine.

#include "fedclip/algorithms.hpp"
#include "fedclip/config.hpp"
#include "fedclip/csv.hpp"
#include "fedclip/dataset.hpp"
#include "fedclip/errors.hpp"
#include "fedclip/grid_search.hpp"
#include "fedclip/hyperparams.hpp"
#include "fedclip/monitor.hpp"
#include "fedclip/objective.hpp"
#include "fedclip/objectives.hpp"
#include "fedclip/parallel.hpp"
#include "fedclip/partition.hpp"
#include "fedclip/rng.hpp"
#include "fedclip/runner.hpp"
#include "fedclip/step.hpp"
#include "fedclip/svg.hpp"
#include "fedclip/trajectory.hpp"
#include "fedclip/vector.hpp"
