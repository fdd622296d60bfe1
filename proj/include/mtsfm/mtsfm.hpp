#pragma once

#include "mtsfm/core.hpp"
#include "mtsfm/fft.hpp"
#include "mtsfm/quadrature.hpp"
#include "mtsfm/gbf.hpp"
#include "mtsfm/waveform.hpp"
#include "mtsfm/ambiguity.hpp"
#include "mtsfm/objective.hpp"
#include "mtsfm/solver.hpp"
#include "mtsfm/optimize.hpp"
#include "mtsfm/phasecode.hpp"
#include "mtsfm/io.hpp"
