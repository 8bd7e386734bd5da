#pragma once

// Umbrella header for the uncertainty-guided dropout decoding library.
// Individual headers can be included on their own; io.hpp is the only one
// that pulls in the JSON dependency.

#include "dropdec/errors.hpp"
#include "dropdec/random.hpp"
#include "dropdec/probability.hpp"
#include "dropdec/model.hpp"
#include "dropdec/tiny_transformer.hpp"
#include "dropdec/uncertainty.hpp"
#include "dropdec/dropout.hpp"
#include "dropdec/decoder.hpp"
#include "dropdec/eval.hpp"
