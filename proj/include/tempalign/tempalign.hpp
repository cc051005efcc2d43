#pragma once

// Umbrella header for the tempalign toolkit: multilingual temporal-expression
// tagging with a BiLSTM-CRF, adversarial embedding alignment via gradient
// reversal, dictionary-based orthogonal alignment, and TempEval3-style
// scoring.

#include "tempalign/alignment.hpp"
#include "tempalign/config.hpp"
#include "tempalign/corpus.hpp"
#include "tempalign/crf.hpp"
#include "tempalign/embeddings.hpp"
#include "tempalign/errors.hpp"
#include "tempalign/json_io.hpp"
#include "tempalign/labels.hpp"
#include "tempalign/lstm.hpp"
#include "tempalign/model.hpp"
#include "tempalign/ops.hpp"
#include "tempalign/optim.hpp"
#include "tempalign/parallel.hpp"
#include "tempalign/rng.hpp"
#include "tempalign/scoring.hpp"
#include "tempalign/spans.hpp"
#include "tempalign/svd.hpp"
#include "tempalign/tensor.hpp"
#include "tempalign/training.hpp"
