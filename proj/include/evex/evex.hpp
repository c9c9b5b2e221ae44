#pragma once

#include "evex/core.hpp"
#include "evex/crf.hpp"
#include "evex/eval.hpp"
#include "evex/ilp.hpp"
#include "evex/io.hpp"
#include "evex/neural.hpp"
#include "evex/oracle.hpp"
#include "evex/parallel.hpp"
#include "evex/pipeline.hpp"
#include "evex/supervision.hpp"
