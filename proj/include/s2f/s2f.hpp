#pragma once

#include "s2f/data_model.hpp"
#include "s2f/embed.hpp"
#include "s2f/error.hpp"
#include "s2f/features.hpp"
#include "s2f/imaging.hpp"
#include "s2f/metrics.hpp"
#include "s2f/model.hpp"
#include "s2f/random.hpp"
#include "s2f/retrieval.hpp"
#include "s2f/synth.hpp"
#include "s2f/training.hpp"
