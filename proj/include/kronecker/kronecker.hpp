#pragma once

#include "kronecker/error.hpp"
#include "kronecker/phase.hpp"
#include "kronecker/random.hpp"
#include "kronecker/systems.hpp"
#include "kronecker/integrators.hpp"
#include "kronecker/dsl/expr.hpp"
#include "kronecker/dsl/parser.hpp"
#include "kronecker/dsl/calculus.hpp"
#include "kronecker/dsl/field.hpp"
#include "kronecker/dsl/source.hpp"
#include "kronecker/analysis/conservation.hpp"
#include "kronecker/analysis/tori.hpp"
#include "kronecker/analysis/poincare.hpp"
#include "kronecker/analysis/frequency.hpp"
#include "kronecker/analysis/survey.hpp"
#include "kronecker/analysis/reversibility.hpp"
