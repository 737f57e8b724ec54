// Umbrella header: the whole library.
#pragma once

#include "activation.hpp"
#include "cli.hpp"
#include "errors.hpp"
#include "gradflow.hpp"
#include "io.hpp"
#include "limits.hpp"
#include "minima.hpp"
#include "potential.hpp"
#include "recipes.hpp"
#include "svg.hpp"
#include "types.hpp"
