#pragma once

// Umbrella header.

#include "p2n/checkpoint.hpp"
#include "p2n/dataset.hpp"
#include "p2n/denoiser.hpp"
#include "p2n/engine.hpp"
#include "p2n/errors.hpp"
#include "p2n/evaluation.hpp"
#include "p2n/image.hpp"
#include "p2n/io.hpp"
#include "p2n/metrics.hpp"
#include "p2n/noise.hpp"
#include "p2n/parallel.hpp"
#include "p2n/rng.hpp"
#include "p2n/synthetic.hpp"
