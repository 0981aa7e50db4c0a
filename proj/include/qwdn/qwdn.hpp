#pragma once

#include "qwdn/error.hpp"
#include "qwdn/network.hpp"
#include "qwdn/inp.hpp"
#include "qwdn/fixtures.hpp"
#include "qwdn/gga.hpp"
#include "qwdn/statevector.hpp"
#include "qwdn/nelder_mead.hpp"
#include "qwdn/vqls.hpp"
#include "qwdn/hhl.hpp"
#include "qwdn/qubo.hpp"
#include "qwdn/hydraulic_qubo.hpp"
#include "qwdn/bench.hpp"
