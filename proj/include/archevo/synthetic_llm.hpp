#pragma once

#include <cstdint>
#include <string>

#include "archevo/evaluation.hpp"
#include "archevo/llm_gateway.hpp"

namespace archevo {

// Stand-in chat model for offline demos and tests. It recognizes the search
// prompts (mutation, idea mutation, debug, downscale, structural check) and
// answers with model code carrying a surrogate descriptor. Every answer is a
// pure function of (seed, stream, seq, request), so runs replay exactly at any
// worker count.
struct SyntheticOptions {
  double compile_fail = 0.15;    // generation emits a broken descriptor
  double debug_fail = 0.25;      // a debug answer is still broken
  double echo = 0.06;            // generation returns the parent unchanged
  double oversize = 0.12;        // generation overshoots the budgets
  double downscale_fail = 0.1;   // a downscale answer does not compile
  double unparsable_verdict = 0.03;
};

Responder make_synthetic_responder(std::uint64_t seed, SyntheticOptions options = {});

// Python-like model source around a descriptor; used for generated
// candidates and fixtures alike.
std::string render_model_source(const SurrogateDescriptor& d);

}  // namespace archevo
