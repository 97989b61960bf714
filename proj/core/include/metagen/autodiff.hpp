#pragma once

#include "metagen/autodiff/adam.hpp"
#include "metagen/autodiff/layers.hpp"
#include "metagen/autodiff/ops.hpp"
#include "metagen/autodiff/tape.hpp"
