#pragma once

#include "infrachamber/signal.hpp"
#include "infrachamber/chamber.hpp"
#include "infrachamber/sysid.hpp"
#include "infrachamber/compensation.hpp"
#include "infrachamber/io.hpp"
#include "infrachamber/svg.hpp"
#include "infrachamber/experiments.hpp"
