#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mia/index.hpp"
#include "mia/prompts.hpp"
#include "mia/providers.hpp"
#include "mia/retrieval.hpp"
#include "mia/signature.hpp"

namespace mia {

// ---------------------------------------------------------------------------
// Update-step protocol
// ---------------------------------------------------------------------------

enum class UpdateAction { Answer, Refine };
enum class Confidence { High, Medium, Low };

const char* update_action_name(UpdateAction a);
const char* confidence_name(Confidence c);

// Parsed output of the state-update model.
struct UpdateResult {
  std::vector<std::string> evidence_memory;
  Confidence confidence = Confidence::Medium;
  std::string thought;
  UpdateAction action = UpdateAction::Answer;
  std::optional<std::string> refined_signature;
  std::optional<std::string> rewritten_query;
};

// Extracts the tagged fields of the update reply. Unknown tags are ignored
// and fields are trimmed; evidence bullets split on leading-dash lines.
// Throws MissingAction, InvalidAction, MissingRefinement. A missing or
// malformed confidence tag degrades to MEDIUM rather than failing the step.
UpdateResult parse_update_output(const std::string& text);

// Canonical tagged rendering (inverse of parse_update_output for
// round-trip checks and scripted fixtures).
std::string format_update_output(const UpdateResult& result);

// ---------------------------------------------------------------------------
// Answer-time context composition
// ---------------------------------------------------------------------------

enum class AnswerVariant { Chunks, ChunksSig, ChunksEvi, ChunksSigEvi };

AnswerVariant answer_variant_from_string(const std::string& s);
const char* answer_variant_name(AnswerVariant v);

// Concatenates the selected memory states in fixed order: signature,
// evidence bullets, then passages. Section headers are "[Signature]",
// "[Evidence Memory]" and "[Retrieved Passages]"; passages are labeled
// "Passage <position>:". Empty optional sections are omitted entirely.
std::string compose_answer_context(AnswerVariant variant,
                                   std::span<const std::string> chunk_texts,
                                   const std::string& signature_text,
                                   std::span<const std::string> evidence);

// ---------------------------------------------------------------------------
// Agent state machine
// ---------------------------------------------------------------------------

enum class InitMode { Coverage, FirstK };

InitMode init_mode_from_string(const std::string& s);

struct AgentConfig {
  int n_stop = 3;                 // refinement budget (update steps)
  double alpha = kDefaultAlpha;
  std::uint32_t step_k = kStepRetrieveK;        // chunks per loop retrieval
  std::uint32_t init_candidates = kStepZeroCandidates;  // step-0 slate (K0)
  std::uint32_t signature_budget = 5;           // K_sum
  InitMode init_mode = InitMode::FirstK;
  ObjectiveWeights init_weights;                // used by coverage mode
  bool rewrite_enabled = true;
  AnswerVariant variant = AnswerVariant::ChunksSigEvi;
  TaskKind task_kind = TaskKind::OpenQA;
  std::string options_str;        // rendered options; empty for open-ended
};

struct StepRecord {
  int step = 0;
  std::string query;             // q_t used for this retrieval
  std::string signature;         // sigma_t used for this retrieval
  std::vector<std::uint32_t> retrieved_ids;
  std::string decision;          // ANSWER | REFINE | FORCED_ANSWER
  std::string confidence;
  std::vector<std::string> evidence;  // E_{t+1} after this step
};

// Co-evolving agent state (q_t, sigma_t, E_t). After the first refinement
// the signature is model-written prose.
struct AgentState {
  int step = 0;
  std::string query;
  std::string signature_text;
  std::vector<std::string> evidence;
  std::vector<StepRecord> history;
};

struct AgentTrace {
  std::string question;
  Signature initial_signature;
  std::vector<StepRecord> steps;
  // Exactly what the generator received.
  std::vector<std::uint32_t> final_chunk_ids;
  std::string final_signature;
  std::vector<std::string> final_evidence;
  std::string answer_context;
  // Counters. update_calls counts provider invocations (parse retries
  // included); update_steps counts loop iterations and never exceeds n_stop.
  int update_calls = 0;
  int update_steps = 0;
  int retrieval_calls = 0;
  bool forced_answer = false;
  bool evidence_repaired = false;
};

std::string trace_to_json(const AgentTrace& trace);

struct AgentRunResult {
  std::string answer_text;                 // raw generator completion
  std::optional<ParsedAnswer> parsed;      // absent when unparseable
  AgentTrace trace;
};

// Providers and templates an agent run needs. Limiting/serialization of
// provider access is the caller's concern (see Engine).
struct AgentServices {
  EmbeddingProvider& embedder;
  LLMProvider& updater;
  LLMProvider& generator;
  const TemplateSet& templates;
};

// Step-0 signature construction: broad query-only retrieval, mapping through
// the window partition into a candidate pool, then the configured selector.
Signature init_signature(const std::string& question, const MindscapeIndex& index,
                         EmbeddingProvider& embedder, InitMode mode,
                         std::uint32_t init_candidates, std::uint32_t budget,
                         const ObjectiveWeights& weights);

// One update step against an already-retrieved slate: fills the update
// prompt, calls the updater, applies the refinement to a copy of the state.
// A reply that fails to parse is retried once with a format reminder, then
// forces an ANSWER decision.
struct StepOutcome {
  UpdateAction decision = UpdateAction::Answer;
  bool forced = false;
  std::optional<UpdateResult> result;   // absent when forced by parse failure
  AgentState next_state;
  int provider_calls = 0;
  bool evidence_repaired = false;
};

StepOutcome agent_step(const AgentState& state, const std::string& question,
                       const RankedList& retrieved,
                       const MindscapeIndex& index,
                       std::span<const std::uint32_t> summaries_of_retrieved,
                       LLMProvider& updater, const TemplateSet& templates,
                       const AgentConfig& config);

// Full loop per the agent algorithm: init, retrieve with (q_t, sigma_t),
// update, and answer generation from the final state.
AgentRunResult run_agent(const std::string& question, const MindscapeIndex& index,
                         AgentServices services, const AgentConfig& config);

}  // namespace mia
