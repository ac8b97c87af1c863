#pragma once

// Dense arrays with define-by-run reverse-mode differentiation.

#include "ecgbench/diffcore/array.hpp"
#include "ecgbench/diffcore/conv.hpp"
#include "ecgbench/diffcore/elementwise.hpp"
#include "ecgbench/diffcore/grad_check.hpp"
#include "ecgbench/diffcore/linalg.hpp"
#include "ecgbench/diffcore/norm.hpp"
#include "ecgbench/diffcore/reduce.hpp"
#include "ecgbench/diffcore/shape_ops.hpp"
#include "ecgbench/diffcore/tape.hpp"
