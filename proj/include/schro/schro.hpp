#pragma once

#include "schro/error.hpp"
#include "schro/spectral_sphere.hpp"
#include "schro/system_algebra.hpp"
#include "schro/families.hpp"
#include "schro/solver.hpp"
#include "schro/diagnostics.hpp"
#include "schro/continuation.hpp"
