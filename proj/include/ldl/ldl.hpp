#pragma once

#include "ldl/agg_expand.hpp"
#include "ldl/analysis.hpp"
#include "ldl/ast.hpp"
#include "ldl/choice.hpp"
#include "ldl/engine.hpp"
#include "ldl/eval.hpp"
#include "ldl/graph.hpp"
#include "ldl/lam.hpp"
#include "ldl/parser.hpp"
#include "ldl/printer.hpp"
#include "ldl/safety.hpp"
#include "ldl/session.hpp"
#include "ldl/sqlgen.hpp"
#include "ldl/store.hpp"
#include "ldl/uda.hpp"
#include "ldl/value.hpp"
#include "ldl/xy.hpp"
