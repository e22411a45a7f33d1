#pragma once

// Umbrella header.

#include "orient/activation.hpp"
#include "orient/bench.hpp"
#include "orient/checkpoint.hpp"
#include "orient/config_io.hpp"
#include "orient/dataset.hpp"
#include "orient/encoder.hpp"
#include "orient/error.hpp"
#include "orient/gradcheck.hpp"
#include "orient/head.hpp"
#include "orient/image.hpp"
#include "orient/image_io.hpp"
#include "orient/metrics.hpp"
#include "orient/model.hpp"
#include "orient/ocr.hpp"
#include "orient/optim.hpp"
#include "orient/rng.hpp"
#include "orient/synth.hpp"
#include "orient/tensor.hpp"
#include "orient/tiling.hpp"
#include "orient/training.hpp"
