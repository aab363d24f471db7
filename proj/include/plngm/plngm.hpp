#pragma once

#include "plngm/error.hpp"
#include "plngm/types.hpp"
#include "plngm/pln.hpp"
#include "plngm/posterior.hpp"
#include "plngm/glasso.hpp"
#include "plngm/exact_oracle.hpp"
#include "plngm/bench.hpp"
#include "plngm/io.hpp"
#include "plngm/pipeline.hpp"
