#pragma once

#include "lightsb/core.hpp"
#include "lightsb/datasets.hpp"
#include "lightsb/dynamics.hpp"
#include "lightsb/evaluation.hpp"
#include "lightsb/marginal.hpp"
#include "lightsb/mixture_potential.hpp"
#include "lightsb/parallel.hpp"
#include "lightsb/rng.hpp"
#include "lightsb/sinkhorn.hpp"
#include "lightsb/training.hpp"
