#ifndef KOLMO_KOLMO_HPP_
#define KOLMO_KOLMO_HPP_

#include "kolmo/bounds.hpp"
#include "kolmo/erm_train.hpp"
#include "kolmo/error.hpp"
#include "kolmo/experiments.hpp"
#include "kolmo/matrix.hpp"
#include "kolmo/neural.hpp"
#include "kolmo/oracle.hpp"
#include "kolmo/pde_model.hpp"
#include "kolmo/rng.hpp"
#include "kolmo/sde_sim.hpp"
#include "kolmo/stats.hpp"
#include "kolmo/svg.hpp"

#endif  // KOLMO_KOLMO_HPP_
