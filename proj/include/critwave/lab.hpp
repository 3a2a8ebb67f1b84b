#pragma once

#include "critwave/lab/config.hpp"
#include "critwave/lab/manifest.hpp"
#include "critwave/lab/scenarios.hpp"
#include "critwave/lab/sweep.hpp"
#include "critwave/lab/verify.hpp"
