#pragma once

#include "eofdual/types.hpp"
#include "eofdual/linalg.hpp"
#include "eofdual/random.hpp"
#include "eofdual/optimize.hpp"
#include "eofdual/entanglement.hpp"
#include "eofdual/conjugate.hpp"
#include "eofdual/purity.hpp"
#include "eofdual/io.hpp"
#include "eofdual/lab.hpp"
