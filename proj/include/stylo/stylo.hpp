#pragma once

#include "stylo/annotation.hpp"
#include "stylo/cart.hpp"
#include "stylo/config.hpp"
#include "stylo/corpus.hpp"
#include "stylo/error.hpp"
#include "stylo/eval.hpp"
#include "stylo/experiments.hpp"
#include "stylo/explain.hpp"
#include "stylo/features.hpp"
#include "stylo/gbdt.hpp"
#include "stylo/model.hpp"
#include "stylo/parallel.hpp"
#include "stylo/random.hpp"
#include "stylo/util.hpp"
