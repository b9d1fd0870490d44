// Umbrella header for the cidra library.
#pragma once

namespace cidra {
inline constexpr const char* version_string = "1.0.0";
}

#include "cidra/bench.hpp"
#include "cidra/eigenproblem.hpp"
#include "cidra/errors.hpp"
#include "cidra/hash.hpp"
#include "cidra/model_io.hpp"
#include "cidra/params.hpp"
#include "cidra/realisation.hpp"
#include "cidra/simulate.hpp"
#include "cidra/svd.hpp"
#include "cidra/threading.hpp"
#include "cidra/transfer.hpp"
