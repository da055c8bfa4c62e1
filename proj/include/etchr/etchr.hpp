#pragma once

// Convenience header pulling in the whole library.

#include "etchr/backends.hpp"
#include "etchr/config.hpp"
#include "etchr/errors.hpp"
#include "etchr/eval.hpp"
#include "etchr/grid_tasks.hpp"
#include "etchr/gridworld.hpp"
#include "etchr/http_backends.hpp"
#include "etchr/image.hpp"
#include "etchr/jigsaw.hpp"
#include "etchr/overlay.hpp"
#include "etchr/pipeline.hpp"
#include "etchr/png.hpp"
#include "etchr/prompts.hpp"
#include "etchr/random.hpp"
#include "etchr/rewards.hpp"
#include "etchr/task.hpp"
