#include "mia/agent.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mia/error.hpp"
#include "mia/log.hpp"

namespace mia {

using nlohmann::json;

const char* update_action_name(UpdateAction a) {
  return a == UpdateAction::Answer ? "ANSWER" : "REFINE";
}

const char* confidence_name(Confidence c) {
  switch (c) {
    case Confidence::High: return "HIGH";
    case Confidence::Medium: return "MEDIUM";
    case Confidence::Low: return "LOW";
  }
  return "?";
}

namespace {

std::string trim_copy(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::optional<std::string> extract_tag(const std::string& text,
                                       const std::string& tag) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  auto a = text.find(open);
  if (a == std::string::npos) return std::nullopt;
  a += open.size();
  auto b = text.find(close, a);
  if (b == std::string::npos) return std::nullopt;
  return trim_copy(std::string_view(text).substr(a, b - a));
}

std::vector<std::string> split_bullets(const std::string& block) {
  std::vector<std::string> bullets;
  std::istringstream in(block);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim_copy(line);
    if (t.empty()) continue;
    if (t.front() == '-') {
      bullets.push_back(trim_copy(std::string_view(t).substr(1)));
    } else if (!bullets.empty()) {
      bullets.back() += ' ';
      bullets.back() += t;
    } else {
      bullets.push_back(std::move(t));
    }
  }
  return bullets;
}

}  // namespace

UpdateResult parse_update_output(const std::string& text) {
  UpdateResult result;

  auto action = extract_tag(text, "action");
  if (!action) raise(ErrorCode::MissingAction, "no <action> tag in update output");
  if (*action == "ANSWER") {
    result.action = UpdateAction::Answer;
  } else if (*action == "REFINE") {
    result.action = UpdateAction::Refine;
  } else {
    raise(ErrorCode::InvalidAction, "unexpected action '" + *action + "'");
  }

  if (auto ev = extract_tag(text, "evidence_memory")) {
    result.evidence_memory = split_bullets(*ev);
  }
  if (auto conf = extract_tag(text, "confidence")) {
    if (*conf == "HIGH") result.confidence = Confidence::High;
    else if (*conf == "MEDIUM") result.confidence = Confidence::Medium;
    else if (*conf == "LOW") result.confidence = Confidence::Low;
    // anything else keeps the MEDIUM default
  }
  if (auto thought = extract_tag(text, "thought")) {
    result.thought = *thought;
  }
  if (auto sig = extract_tag(text, "refined_signature"); sig && !sig->empty()) {
    result.refined_signature = *sig;
  }
  if (auto q = extract_tag(text, "rewritten_query"); q && !q->empty()) {
    result.rewritten_query = *q;
  }

  if (result.action == UpdateAction::Refine && !result.refined_signature) {
    raise(ErrorCode::MissingRefinement, "REFINE without <refined_signature>");
  }
  return result;
}

std::string format_update_output(const UpdateResult& result) {
  std::string out = "<evidence_memory>\n";
  for (const auto& b : result.evidence_memory) out += "- " + b + "\n";
  out += "</evidence_memory>\n";
  out += std::string("<confidence>") + confidence_name(result.confidence) + "</confidence>\n";
  out += "<thought>" + result.thought + "</thought>\n";
  out += std::string("<action>") + update_action_name(result.action) + "</action>\n";
  if (result.refined_signature) {
    out += "<refined_signature>" + *result.refined_signature + "</refined_signature>\n";
  }
  if (result.rewritten_query) {
    out += "<rewritten_query>" + *result.rewritten_query + "</rewritten_query>\n";
  }
  return out;
}

AnswerVariant answer_variant_from_string(const std::string& s) {
  if (s == "chunks") return AnswerVariant::Chunks;
  if (s == "chunks+sig") return AnswerVariant::ChunksSig;
  if (s == "chunks+evi") return AnswerVariant::ChunksEvi;
  if (s == "chunks+sig+evi") return AnswerVariant::ChunksSigEvi;
  raise(ErrorCode::ConfigError, "unknown answer variant '" + s + "'");
}

const char* answer_variant_name(AnswerVariant v) {
  switch (v) {
    case AnswerVariant::Chunks: return "chunks";
    case AnswerVariant::ChunksSig: return "chunks+sig";
    case AnswerVariant::ChunksEvi: return "chunks+evi";
    case AnswerVariant::ChunksSigEvi: return "chunks+sig+evi";
  }
  return "?";
}

std::string compose_answer_context(AnswerVariant variant,
                                   std::span<const std::string> chunk_texts,
                                   const std::string& signature_text,
                                   std::span<const std::string> evidence) {
  if (chunk_texts.empty()) {
    raise(ErrorCode::InvalidArgument, "answer context needs at least one chunk");
  }
  const bool with_sig =
      variant == AnswerVariant::ChunksSig || variant == AnswerVariant::ChunksSigEvi;
  const bool with_evi =
      variant == AnswerVariant::ChunksEvi || variant == AnswerVariant::ChunksSigEvi;

  std::string out;
  if (with_sig && !signature_text.empty()) {
    out += "[Signature]\n" + signature_text + "\n\n";
  }
  if (with_evi && !evidence.empty()) {
    out += "[Evidence Memory]\n";
    for (const auto& b : evidence) out += "- " + b + "\n";
    out += "\n";
  }
  out += "[Retrieved Passages]\n";
  for (std::size_t i = 0; i < chunk_texts.size(); ++i) {
    out += "Passage " + std::to_string(i + 1) + ":\n" + chunk_texts[i];
    out += "\n";
    if (i + 1 < chunk_texts.size()) out += "\n";
  }
  return out;
}

InitMode init_mode_from_string(const std::string& s) {
  if (s == "coverage") return InitMode::Coverage;
  if (s == "first-k") return InitMode::FirstK;
  raise(ErrorCode::ConfigError, "unknown init mode '" + s + "'");
}

Signature init_signature(const std::string& question, const MindscapeIndex& index,
                         EmbeddingProvider& embedder, InitMode mode,
                         std::uint32_t init_candidates, std::uint32_t budget,
                         const ObjectiveWeights& weights) {
  const EmbeddingVector query = embedder.embed(question);
  RankedList slate = query_only_retrieve(query, index, init_candidates);
  const auto ids = slate.chunk_ids();
  CandidatePool pool = make_candidate_pool(ids, index);
  if (mode == InitMode::Coverage) {
    return greedy_select(pool, query, budget, weights);
  }
  return first_k_select(pool, budget);
}

namespace {

std::string render_summaries_text(const MindscapeIndex& index,
                                  std::span<const std::uint32_t> summary_ids) {
  std::string out;
  for (std::size_t i = 0; i < summary_ids.size(); ++i) {
    if (i) out += "\n\n";
    out += "[Summary " + std::to_string(summary_ids[i]) + "]\n";
    out += index.summary(summary_ids[i]).text;
  }
  return out.empty() ? "(none)" : out;
}

std::string render_chunks_text(const MindscapeIndex& index,
                               const RankedList& retrieved) {
  std::string out;
  for (std::size_t i = 0; i < retrieved.entries.size(); ++i) {
    if (i) out += "\n\n";
    out += "[Chunk " + std::to_string(retrieved.entries[i].chunk_id) + "]\n";
    out += index.chunk(retrieved.entries[i].chunk_id).text;
  }
  return out.empty() ? "(none)" : out;
}

std::string render_evidence_text(std::span<const std::string> evidence) {
  if (evidence.empty()) return "(empty)";
  std::string out;
  for (const auto& b : evidence) out += "- " + b + "\n";
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

std::string render_history_section(std::span<const StepRecord> history) {
  if (history.empty()) return "";
  std::string out = "Previous steps:";
  for (const auto& rec : history) {
    out += "\n- Step " + std::to_string(rec.step + 1) + ": " + rec.decision +
           " (confidence " + rec.confidence + "), query: " + rec.query;
  }
  return out;
}

// Union-repair: the update prompt asks the model to re-emit the running
// evidence list, so silently dropped facts are appended back.
std::vector<std::string> apply_evidence(const std::vector<std::string>& previous,
                                        const std::vector<std::string>& emitted,
                                        bool* repaired) {
  std::vector<std::string> merged = emitted;
  for (const auto& old : previous) {
    if (std::find(merged.begin(), merged.end(), old) == merged.end()) {
      merged.push_back(old);
      *repaired = true;
    }
  }
  return merged;
}

}  // namespace

StepOutcome agent_step(const AgentState& state, const std::string& question,
                       const RankedList& retrieved, const MindscapeIndex& index,
                       std::span<const std::uint32_t> summaries_of_retrieved,
                       LLMProvider& updater, const TemplateSet& templates,
                       const AgentConfig& config) {
  if (state.step >= config.n_stop) {
    raise(ErrorCode::OutOfRange, "agent stepped past its refinement budget");
  }

  const int display_step = state.step + 1;
  const int remaining = config.n_stop - display_step;
  const std::string hint =
      remaining > 0 ? std::to_string(remaining) + " steps remaining"
                    : "Last step, you must ANSWER.";

  Bindings bindings{
      {"question", question},
      {"options_str", config.options_str},
      {"step", std::to_string(display_step)},
      {"max_steps", std::to_string(config.n_stop)},
      {"remaining_steps_hint", hint},
      {"signature", state.signature_text},
      {"current_query", state.query},
      {"summaries_text", render_summaries_text(index, summaries_of_retrieved)},
      {"evidence_memory", render_evidence_text(state.evidence)},
      {"chunks_text", render_chunks_text(index, retrieved)},
      {"history_section", render_history_section(state.history)},
  };
  const RenderedPrompt prompt = render(templates.get("update"), bindings);

  StepOutcome outcome;
  std::optional<UpdateResult> parsed;
  std::string reply =
      complete(updater, ChatRequest{prompt.system, prompt.user, "update"});
  outcome.provider_calls = 1;
  try {
    parsed = parse_update_output(reply);
  } catch (const Error& first_err) {
    log_warn(std::string("update output unparseable, re-prompting: ") + first_err.what());
    const std::string reminder =
        prompt.user +
        "\n\nYour previous reply could not be parsed. Reply again and follow "
        "the Output format tags exactly.";
    reply = complete(updater, ChatRequest{prompt.system, reminder, "update"});
    outcome.provider_calls = 2;
    try {
      parsed = parse_update_output(reply);
    } catch (const Error& second_err) {
      log_warn(std::string("update output unparseable twice, forcing ANSWER: ") +
               second_err.what());
      outcome.forced = true;
    }
  }

  AgentState next = state;
  next.step = state.step + 1;

  StepRecord record;
  record.step = state.step;
  record.query = state.query;
  record.signature = state.signature_text;
  record.retrieved_ids = retrieved.chunk_ids();

  if (outcome.forced) {
    outcome.decision = UpdateAction::Answer;
    record.decision = "FORCED_ANSWER";
    record.confidence = confidence_name(Confidence::Low);
  } else {
    const UpdateResult& r = *parsed;
    outcome.decision = r.action;
    record.decision = update_action_name(r.action);
    record.confidence = confidence_name(r.confidence);

    next.evidence = apply_evidence(state.evidence, r.evidence_memory,
                                   &outcome.evidence_repaired);
    if (outcome.evidence_repaired) {
      log_warn("update dropped evidence items; restored the prior entries");
    }
    if (r.refined_signature) {
      next.signature_text = *r.refined_signature;
    }
    if (r.action == UpdateAction::Refine && config.rewrite_enabled &&
        r.rewritten_query) {
      next.query = *r.rewritten_query;
    }
    outcome.result = r;
  }

  record.evidence = next.evidence;
  next.history.push_back(std::move(record));
  outcome.next_state = std::move(next);
  return outcome;
}

AgentRunResult run_agent(const std::string& question, const MindscapeIndex& index,
                         AgentServices services, const AgentConfig& config) {
  if (config.n_stop < 1) raise(ErrorCode::InvalidArgument, "n_stop must be >= 1");
  config.init_weights.validate();

  AgentRunResult out;
  AgentTrace& trace = out.trace;
  trace.question = question;

  trace.initial_signature = init_signature(
      question, index, services.embedder, config.init_mode,
      config.init_candidates, config.signature_budget, config.init_weights);

  AgentState state;
  state.query = question;
  state.signature_text = trace.initial_signature.rendered_text;

  RankedList last_retrieved;
  bool answered = false;
  for (int t = 0; t < config.n_stop; ++t) {
    last_retrieved =
        mia_retrieve(state.query, Signature::free_text(state.signature_text),
                     services.embedder, index, config.step_k, config.alpha);
    ++trace.retrieval_calls;

    // H_t: summaries of the retrieved chunks, deduplicated in rank order.
    std::vector<std::uint32_t> summary_ids;
    for (const auto& e : last_retrieved.entries) {
      const std::uint32_t sid = index.summary_of(e.chunk_id);
      if (std::find(summary_ids.begin(), summary_ids.end(), sid) ==
          summary_ids.end()) {
        summary_ids.push_back(sid);
      }
    }

    StepOutcome outcome =
        agent_step(state, question, last_retrieved, index, summary_ids,
                   services.updater, services.templates, config);
    trace.update_calls += outcome.provider_calls;
    ++trace.update_steps;
    trace.evidence_repaired |= outcome.evidence_repaired;
    trace.forced_answer |= outcome.forced;
    state = std::move(outcome.next_state);

    if (outcome.decision == UpdateAction::Answer) {
      answered = true;
      break;
    }
  }
  if (!answered) {
    // Budget exhausted on REFINE: answer from the last retrieved slate and
    // the fully-updated state.
    trace.forced_answer = true;
  }

  trace.steps = state.history;
  trace.final_chunk_ids = last_retrieved.chunk_ids();
  trace.final_signature = state.signature_text;
  trace.final_evidence = state.evidence;

  std::vector<std::string> chunk_texts;
  chunk_texts.reserve(trace.final_chunk_ids.size());
  for (std::uint32_t id : trace.final_chunk_ids) {
    chunk_texts.push_back(index.chunk(id).text);
  }
  trace.answer_context = compose_answer_context(
      config.variant, chunk_texts, trace.final_signature, trace.final_evidence);

  Bindings answer_bindings;
  if (config.task_kind == TaskKind::Detective) {
    answer_bindings = {{"answer_context", trace.answer_context},
                       {"question", question},
                       {"options_str", config.options_str}};
  } else if (config.task_kind == TaskKind::OpenQA) {
    answer_bindings = {{"context", trace.answer_context}, {"question", question}};
  } else {
    answer_bindings = {{"context", trace.answer_context}, {"claim", question}};
  }
  const std::string template_id = answer_template_id(config.task_kind);
  const RenderedPrompt prompt =
      render(services.templates.get(template_id), answer_bindings);
  out.answer_text = complete(services.generator,
                             ChatRequest{prompt.system, prompt.user, template_id});
  try {
    out.parsed = parse_answer(out.answer_text, config.task_kind);
  } catch (const Error& e) {
    log_warn(std::string("generator answer unparseable: ") + e.what());
  }
  return out;
}

std::string trace_to_json(const AgentTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"step", s.step},
                     {"query", s.query},
                     {"signature", s.signature},
                     {"retrieved_ids", s.retrieved_ids},
                     {"decision", s.decision},
                     {"confidence", s.confidence},
                     {"evidence", s.evidence}});
  }
  json j{{"question", trace.question},
         {"initial_signature",
          {{"selected", trace.initial_signature.selected},
           {"rendered_text", trace.initial_signature.rendered_text}}},
         {"steps", std::move(steps)},
         {"final_chunk_ids", trace.final_chunk_ids},
         {"final_signature", trace.final_signature},
         {"final_evidence", trace.final_evidence},
         {"update_calls", trace.update_calls},
         {"update_steps", trace.update_steps},
         {"retrieval_calls", trace.retrieval_calls},
         {"forced_answer", trace.forced_answer},
         {"evidence_repaired", trace.evidence_repaired}};
  return j.dump(2);
}

}  // namespace mia
