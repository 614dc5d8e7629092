#pragma once

#include "fploc/core.hpp"
#include "fploc/dataset_io.hpp"
#include "fploc/eval.hpp"
#include "fploc/forest.hpp"
#include "fploc/hybrid.hpp"
#include "fploc/knn.hpp"
#include "fploc/kstar.hpp"
#include "fploc/linear.hpp"
#include "fploc/models.hpp"
#include "fploc/persistence.hpp"
#include "fploc/rbf.hpp"
#include "fploc/replay.hpp"
#include "fploc/synthworld.hpp"
#include "fploc/trajectory.hpp"
#include "fploc/util.hpp"
