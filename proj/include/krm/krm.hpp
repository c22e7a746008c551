#pragma once

#include "krm/error.hpp"
#include "krm/metric_space.hpp"
#include "krm/lipschitz.hpp"
#include "krm/measure.hpp"
#include "krm/transport.hpp"
#include "krm/hutchinson.hpp"
#include "krm/diagnostics.hpp"
