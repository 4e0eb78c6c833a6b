#pragma once

#include "bcsdp/analysis.hpp"
#include "bcsdp/bcm.hpp"
#include "bcsdp/block_sparse_sym.hpp"
#include "bcsdp/common.hpp"
#include "bcsdp/problems.hpp"
#include "bcsdp/stiefel.hpp"
