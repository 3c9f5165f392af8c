#pragma once

// Umbrella header.

#include <hgp/hermite_core.hpp>
#include <hgp/function_spaces.hpp>
#include <hgp/noise_renorm.hpp>
#include <hgp/observables.hpp>
#include <hgp/dynamics.hpp>
#include <hgp/serialization.hpp>
#include <hgp/harness.hpp>
