#pragma once

#include "latentplan/error.hpp"
#include "latentplan/gp.hpp"
#include "latentplan/dataset.hpp"
#include "latentplan/optimize.hpp"
#include "latentplan/lvm.hpp"
#include "latentplan/dynamics.hpp"
#include "latentplan/tasks.hpp"
#include "latentplan/oracle.hpp"
#include "latentplan/particles.hpp"
#include "latentplan/planner.hpp"
#include "latentplan/multiscale.hpp"
#include "latentplan/synth.hpp"
#include "latentplan/io.hpp"
#include "latentplan/svg.hpp"
