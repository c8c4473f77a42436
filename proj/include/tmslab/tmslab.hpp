#pragma once

#include "tmslab/config.hpp"
#include "tmslab/error.hpp"
#include "tmslab/graph.hpp"
#include "tmslab/loops.hpp"
#include "tmslab/observable.hpp"
#include "tmslab/transfer.hpp"
#include "tmslab/measure.hpp"
#include "tmslab/thermo.hpp"
#include "tmslab/renewal.hpp"
#include "tmslab/decorrelate.hpp"
#include "tmslab/battery.hpp"
#include "tmslab/ekp.hpp"
#include "tmslab/io.hpp"
