// Umbrella header for the representation-free notation toolkit.
#pragma once

#include "ast.hpp"
#include "check.hpp"
#include "complex_linalg.hpp"
#include "eval.hpp"
#include "model.hpp"
#include "parse.hpp"
#include "render.hpp"
#include "rewrite.hpp"
