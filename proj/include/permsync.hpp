#pragma once

#include "permsync/cluster.hpp"
#include "permsync/error.hpp"
#include "permsync/experiment.hpp"
#include "permsync/format.hpp"
#include "permsync/io.hpp"
#include "permsync/model.hpp"
#include "permsync/permutation.hpp"
#include "permsync/plot.hpp"
#include "permsync/rng.hpp"
#include "permsync/spectrum.hpp"
#include "permsync/sync.hpp"
