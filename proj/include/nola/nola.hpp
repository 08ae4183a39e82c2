#pragma once

#include "nola/accounting.hpp"
#include "nola/basis.hpp"
#include "nola/data.hpp"
#include "nola/errors.hpp"
#include "nola/factors.hpp"
#include "nola/layers.hpp"
#include "nola/linalg.hpp"
#include "nola/matrix.hpp"
#include "nola/quant.hpp"
#include "nola/random.hpp"
#include "nola/task_store.hpp"
#include "nola/train.hpp"
