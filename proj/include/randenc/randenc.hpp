#pragma once

#include "checkpoint.hpp"
#include "embeddings.hpp"
#include "encode.hpp"
#include "encoders.hpp"
#include "numerics.hpp"
#include "params.hpp"
#include "probe.hpp"
#include "runner.hpp"
#include "selfcheck.hpp"
#include "tasks.hpp"
#include "trees.hpp"
