#pragma once

#include "ikan/adam.hpp"
#include "ikan/baselines.hpp"
#include "ikan/bspline.hpp"
#include "ikan/checkpoint.hpp"
#include "ikan/classifier.hpp"
#include "ikan/data.hpp"
#include "ikan/encoder.hpp"
#include "ikan/errors.hpp"
#include "ikan/experiment.hpp"
#include "ikan/grad_check.hpp"
#include "ikan/kan.hpp"
#include "ikan/layers.hpp"
#include "ikan/metrics.hpp"
#include "ikan/mlp.hpp"
#include "ikan/redistribution.hpp"
#include "ikan/task_manager.hpp"
#include "ikan/tensor.hpp"
