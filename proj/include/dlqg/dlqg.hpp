#pragma once

#include "dlqg/baselines.hpp"
#include "dlqg/core.hpp"
#include "dlqg/coupled.hpp"
#include "dlqg/error.hpp"
#include "dlqg/evaluation.hpp"
#include "dlqg/io.hpp"
#include "dlqg/linalg.hpp"
#include "dlqg/riccati.hpp"
#include "dlqg/synthesis.hpp"
