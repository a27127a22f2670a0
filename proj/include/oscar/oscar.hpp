#pragma once

#include "oscar/analysis.hpp"
#include "oscar/averaging.hpp"
#include "oscar/config.hpp"
#include "oscar/curve.hpp"
#include "oscar/dynamics.hpp"
#include "oscar/elliptic.hpp"
#include "oscar/params.hpp"
#include "oscar/quasistatic.hpp"
