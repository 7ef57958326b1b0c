#pragma once

#include "inhomo/amp.hpp"
#include "inhomo/error.hpp"
#include "inhomo/model.hpp"
#include "inhomo/priors.hpp"
#include "inhomo/profile.hpp"
#include "inhomo/quadrature.hpp"
#include "inhomo/rng.hpp"
#include "inhomo/spectral.hpp"
#include "inhomo/state_evolution.hpp"
