#pragma once

#include "dpinn/common.hpp"
#include "dpinn/config.hpp"
#include "dpinn/evaluate.hpp"
#include "dpinn/grid.hpp"
#include "dpinn/loss.hpp"
#include "dpinn/net.hpp"
#include "dpinn/optim.hpp"
#include "dpinn/oracle.hpp"
#include "dpinn/problems.hpp"
