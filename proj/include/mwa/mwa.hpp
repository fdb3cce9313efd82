#pragma once

#include "mwa/aligner.hpp"
#include "mwa/checkpoint.hpp"
#include "mwa/config.hpp"
#include "mwa/corpus_io.hpp"
#include "mwa/data_model.hpp"
#include "mwa/edit_ops.hpp"
#include "mwa/embeddings.hpp"
#include "mwa/evaluator.hpp"
#include "mwa/model.hpp"
#include "mwa/optimizer.hpp"
#include "mwa/score_tables.hpp"
#include "mwa/scorer.hpp"
#include "mwa/semicrf.hpp"
#include "mwa/symmetrizer.hpp"
#include "mwa/trainer.hpp"
