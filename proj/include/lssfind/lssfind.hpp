#pragma once

#include "dataset.hpp"
#include "dwp.hpp"
#include "eval.hpp"
#include "forest.hpp"
#include "lss_gen.hpp"
#include "lss_spec.hpp"
#include "miner.hpp"
#include "parallel.hpp"
#include "signed_set.hpp"

namespace lss {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lss
