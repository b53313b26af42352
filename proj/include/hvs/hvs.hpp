#ifndef HVS_HVS_HPP
#define HVS_HVS_HPP

#include "hvs/datagen.hpp"
#include "hvs/design.hpp"
#include "hvs/diagnostics.hpp"
#include "hvs/error.hpp"
#include "hvs/estimators.hpp"
#include "hvs/inclusion.hpp"
#include "hvs/mc_harness.hpp"
#include "hvs/rng.hpp"

#endif  // HVS_HVS_HPP
