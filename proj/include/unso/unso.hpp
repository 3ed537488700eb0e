#pragma once

#include "bench.hpp"
#include "iteration_steps.hpp"
#include "matrix.hpp"
#include "ortho.hpp"
#include "random.hpp"
#include "scalar_poly.hpp"
#include "svd.hpp"
#include "train.hpp"
