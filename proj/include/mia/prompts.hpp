#pragma once

#include <map>
#include <string>
#include <vector>

namespace mia {

// Templates live as versioned data files (templates/*.txt), not string
// literals: the summary cache keys their content hash, so editing a prompt
// invalidates stale caches. File format: an optional "[system]" section
// followed by a "[user]" section; placeholders are written {like_this}.
struct PromptTemplate {
  std::string id;
  std::string system;
  std::string user;
  std::vector<std::string> manifest;  // placeholder names, order of first use
  std::string content_hash;           // hash of the raw file bytes
};

using Bindings = std::map<std::string, std::string>;

struct RenderedPrompt {
  std::string system;
  std::string user;
};

// Exact substitution of {name} placeholders; no recursive expansion, brace
// runs that are not well-formed placeholders pass through untouched.
// Throws MissingPlaceholder when the text references an unbound name.
std::string render_text(const std::string& text, const Bindings& bindings);

// Renders system+user. Additionally rejects binding keys that are not in the
// template manifest (UnknownPlaceholder).
RenderedPrompt render(const PromptTemplate& tmpl, const Bindings& bindings);

PromptTemplate parse_template(const std::string& id, const std::string& raw);

class TemplateSet {
 public:
  // Loads the five shipped templates from a directory:
  // session_summary, update, answer_detective, answer_open_qa, answer_claim.
  static TemplateSet load(const std::string& dir);

  // Resolution order: explicit path, MIA_TEMPLATES_DIR, compiled-in default.
  static TemplateSet load_default(const std::string& explicit_dir = "");

  const PromptTemplate& get(const std::string& id) const;
  bool has(const std::string& id) const { return templates_.count(id) > 0; }

  static const std::vector<std::string>& shipped_ids();

 private:
  std::map<std::string, PromptTemplate> templates_;
};

// ---------------------------------------------------------------------------
// Task-specific answer parsing
// ---------------------------------------------------------------------------

enum class TaskKind { Detective, OpenQA, Claim };

TaskKind task_kind_from_string(const std::string& s);
const char* task_kind_name(TaskKind kind);

// Template id of the answer prompt for a task kind.
std::string answer_template_id(TaskKind kind);

struct ParsedAnswer {
  TaskKind kind;
  // Detective: "A".."D"; OpenQA: trimmed phrase; Claim: "TRUE"/"FALSE".
  std::string value;
};

// Detective replies are located as the first JSON-shaped object in the text,
// since models wrap the required format in prose more often than not.
ParsedAnswer parse_answer(const std::string& text, TaskKind kind);

}  // namespace mia
