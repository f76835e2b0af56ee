#pragma once

#include "diffstop/chain.hpp"
#include "diffstop/derivative.hpp"
#include "diffstop/diffusion.hpp"
#include "diffstop/errors.hpp"
#include "diffstop/extended_real.hpp"
#include "diffstop/fundamental.hpp"
#include "diffstop/quadrature.hpp"
#include "diffstop/representation.hpp"
#include "diffstop/side.hpp"
#include "diffstop/sticky_stopping.hpp"
