#pragma once

#include "spikesync/config.hpp"
#include "spikesync/copula.hpp"
#include "spikesync/errors.hpp"
#include "spikesync/experiments.hpp"
#include "spikesync/gibbs.hpp"
#include "spikesync/gp.hpp"
#include "spikesync/pairwise.hpp"
#include "spikesync/parallel.hpp"
#include "spikesync/random.hpp"
#include "spikesync/samplers/ball_maps.hpp"
#include "spikesync/samplers/ess.hpp"
#include "spikesync/samplers/slice.hpp"
#include "spikesync/samplers/spherical_hmc.hpp"
#include "spikesync/scenario.hpp"
#include "spikesync/simulate.hpp"
#include "spikesync/single.hpp"
#include "spikesync/spike_data.hpp"
#include "spikesync/summary.hpp"
