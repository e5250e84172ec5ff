#pragma once

// Umbrella header.

#include "knm/combiner.hpp"
#include "knm/config.hpp"
#include "knm/corpus.hpp"
#include "knm/datastore.hpp"
#include "knm/distribution.hpp"
#include "knm/errors.hpp"
#include "knm/harness.hpp"
#include "knm/lm_backend.hpp"
#include "knm/metrics.hpp"
#include "knm/ngram_lm.hpp"
#include "knm/remote_lm.hpp"
#include "knm/retrieval.hpp"
#include "knm/synthetic.hpp"
#include "knm/tokenizer.hpp"
