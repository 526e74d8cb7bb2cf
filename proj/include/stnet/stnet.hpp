#pragma once

#include "stnet/autodiff.hpp"
#include "stnet/checkpoint.hpp"
#include "stnet/config.hpp"
#include "stnet/dataset.hpp"
#include "stnet/error.hpp"
#include "stnet/eval.hpp"
#include "stnet/external_schema.hpp"
#include "stnet/grad_check.hpp"
#include "stnet/graph.hpp"
#include "stnet/linalg.hpp"
#include "stnet/model.hpp"
#include "stnet/rng.hpp"
#include "stnet/synth.hpp"
#include "stnet/tensor.hpp"
#include "stnet/timeutil.hpp"
#include "stnet/train.hpp"
