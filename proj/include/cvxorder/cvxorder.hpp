#ifndef CVXORDER_CVXORDER_HPP
#define CVXORDER_CVXORDER_HPP

// Umbrella header pulling in the whole public surface.

#include "cvxorder/errors.hpp"
#include "cvxorder/hypothesis.hpp"
#include "cvxorder/measure.hpp"
#include "cvxorder/order_oracle.hpp"
#include "cvxorder/projection.hpp"
#include "cvxorder/rng.hpp"
#include "cvxorder/serialize.hpp"
#include "cvxorder/transport.hpp"

#endif  // CVXORDER_CVXORDER_HPP
