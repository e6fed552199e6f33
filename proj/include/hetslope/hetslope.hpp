#ifndef HETSLOPE_HETSLOPE_HPP
#define HETSLOPE_HETSLOPE_HPP

#include "hetslope/completion.hpp"
#include "hetslope/error.hpp"
#include "hetslope/inference.hpp"
#include "hetslope/io.hpp"
#include "hetslope/linalg.hpp"
#include "hetslope/orthogonalizer.hpp"
#include "hetslope/panel.hpp"
#include "hetslope/rank_select.hpp"
#include "hetslope/rng.hpp"
#include "hetslope/simulation.hpp"
#include "hetslope/svt_solver.hpp"
#include "hetslope/tuning.hpp"

#endif  // HETSLOPE_HETSLOPE_HPP
