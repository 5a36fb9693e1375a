#pragma once

// Umbrella header.
#include "forge/corpus_io.hpp"
#include "forge/dataset_io.hpp"
#include "forge/digest.hpp"
#include "forge/document.hpp"
#include "forge/error.hpp"
#include "forge/mixture.hpp"
#include "forge/needle.hpp"
#include "forge/packer.hpp"
#include "forge/plan.hpp"
#include "forge/report.hpp"
#include "forge/sampling.hpp"
#include "forge/stats.hpp"
#include "forge/tokenizer.hpp"
#include "forge/units.hpp"
