#pragma once

#include "lenscat/boundary.hpp"
#include "lenscat/cuspmap.hpp"
#include "lenscat/diffeo.hpp"
#include "lenscat/errors.hpp"
#include "lenscat/flow.hpp"
#include "lenscat/geometry.hpp"
#include "lenscat/harness.hpp"
#include "lenscat/linalg.hpp"
#include "lenscat/metric.hpp"
#include "lenscat/parallel.hpp"
#include "lenscat/pullback.hpp"
#include "lenscat/sampling.hpp"
#include "lenscat/scattering.hpp"
#include "lenscat/spec_io.hpp"
#include "lenscat/tabulated.hpp"
