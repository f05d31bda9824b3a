#pragma once

// Umbrella header.

#include "spectral_shrink/common.hpp"
#include "spectral_shrink/coordinates.hpp"
#include "spectral_shrink/csv.hpp"
#include "spectral_shrink/estimators.hpp"
#include "spectral_shrink/experiment_io.hpp"
#include "spectral_shrink/montecarlo.hpp"
#include "spectral_shrink/numeric.hpp"
#include "spectral_shrink/rng.hpp"
#include "spectral_shrink/shrinkage.hpp"
#include "spectral_shrink/spectral_laws.hpp"
#include "spectral_shrink/spike_maps.hpp"
