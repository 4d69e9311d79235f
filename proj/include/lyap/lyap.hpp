#pragma once

// Umbrella header.

#include "lyap/errors.hpp"
#include "lyap/fields.hpp"
#include "lyap/integrators.hpp"
#include "lyap/dynamics.hpp"
#include "lyap/trace.hpp"
#include "lyap/geometry.hpp"
#include "lyap/regularity.hpp"
#include "lyap/analysis.hpp"
#include "lyap/contrast.hpp"
#include "lyap/io.hpp"
#include "lyap/scenario.hpp"
#include "lyap/pipeline.hpp"
#include "lyap/studies.hpp"
