#pragma once

#include "angleboost/bayes.hpp"
#include "angleboost/boost.hpp"
#include "angleboost/csv.hpp"
#include "angleboost/data.hpp"
#include "angleboost/dataset.hpp"
#include "angleboost/eval.hpp"
#include "angleboost/loss.hpp"
#include "angleboost/matrix.hpp"
#include "angleboost/rng.hpp"
#include "angleboost/simplex.hpp"
#include "angleboost/tree.hpp"

namespace angleboost {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace angleboost
