#pragma once

#include "mvmm/errors.hpp"
#include "mvmm/rng.hpp"
#include "mvmm/table.hpp"
#include "mvmm/prob_table.hpp"
#include "mvmm/laplacian.hpp"
#include "mvmm/geig.hpp"
#include "mvmm/barrier.hpp"
#include "mvmm/block_diag_opt.hpp"
#include "mvmm/kmeans.hpp"
#include "mvmm/mixtures.hpp"
#include "mvmm/mvmm_core.hpp"
#include "mvmm/log_pen.hpp"
#include "mvmm/mvmm_bd.hpp"
#include "mvmm/parallel.hpp"
#include "mvmm/selection.hpp"
#include "mvmm/sim.hpp"
#include "mvmm/io.hpp"
