#pragma once

#include "gradforge/activation.hpp"
#include "gradforge/backprop.hpp"
#include "gradforge/config.hpp"
#include "gradforge/conv.hpp"
#include "gradforge/data.hpp"
#include "gradforge/errors.hpp"
#include "gradforge/linalg.hpp"
#include "gradforge/loss.hpp"
#include "gradforge/metrics.hpp"
#include "gradforge/model_io.hpp"
#include "gradforge/network.hpp"
#include "gradforge/optimize.hpp"
#include "gradforge/rng.hpp"
#include "gradforge/util.hpp"
