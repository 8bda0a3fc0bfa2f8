#pragma once

#include "lvorder/data_matrix.hpp"
#include "lvorder/error.hpp"
#include "lvorder/evaluate.hpp"
#include "lvorder/independence.hpp"
#include "lvorder/io.hpp"
#include "lvorder/ordering.hpp"
#include "lvorder/regression.hpp"
#include "lvorder/simulate.hpp"
