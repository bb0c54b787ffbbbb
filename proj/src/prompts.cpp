#include "mia/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mia/error.hpp"
#include "mia/hashing.hpp"

#ifndef MIA_TEMPLATE_DIR
#define MIA_TEMPLATE_DIR ""
#endif

namespace mia {

namespace {

bool is_name_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool is_name_char(char c) {
  return is_name_start(c) || (c >= '0' && c <= '9');
}

// Returns the placeholder name starting at text[pos] ('{'), or empty if the
// brace run is not a well-formed placeholder.
std::string placeholder_at(const std::string& text, std::size_t pos) {
  std::size_t i = pos + 1;
  if (i >= text.size() || !is_name_start(text[i])) return {};
  std::size_t start = i;
  while (i < text.size() && is_name_char(text[i])) ++i;
  if (i >= text.size() || text[i] != '}') return {};
  return text.substr(start, i - start);
}

std::vector<std::string> scan_manifest(const std::string& text) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    std::string name = placeholder_at(text, i);
    if (name.empty()) continue;
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      names.push_back(name);
    }
    i += name.size() + 1;
  }
  return names;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::string render_text(const std::string& text, const Bindings& bindings) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{') {
      std::string name = placeholder_at(text, i);
      if (!name.empty()) {
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          raise(ErrorCode::MissingPlaceholder, "unbound placeholder {" + name + "}");
        }
        out += it->second;
        i += name.size() + 1;
        continue;
      }
    }
    out += text[i];
  }
  return out;
}

RenderedPrompt render(const PromptTemplate& tmpl, const Bindings& bindings) {
  for (const auto& [key, _] : bindings) {
    if (std::find(tmpl.manifest.begin(), tmpl.manifest.end(), key) ==
        tmpl.manifest.end()) {
      raise(ErrorCode::UnknownPlaceholder,
            "binding {" + key + "} not in template '" + tmpl.id + "'");
    }
  }
  return RenderedPrompt{render_text(tmpl.system, bindings),
                        render_text(tmpl.user, bindings)};
}

PromptTemplate parse_template(const std::string& id, const std::string& raw) {
  PromptTemplate t;
  t.id = id;
  t.content_hash = hex64(fnv1a64(raw));

  std::string* section = &t.user;  // markerless files are all user text
  std::string system, user;
  std::istringstream in(raw);
  std::string line;
  bool saw_marker = false;
  while (std::getline(in, line)) {
    if (line == "[system]") {
      section = &system;
      saw_marker = true;
      continue;
    }
    if (line == "[user]") {
      section = &user;
      saw_marker = true;
      continue;
    }
    if (!saw_marker) section = &user;
    *section += line;
    *section += '\n';
  }
  // Section bodies keep inner newlines but not the trailing one added above.
  auto strip_last_nl = [](std::string& s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
  };
  strip_last_nl(system);
  strip_last_nl(user);
  t.system = std::move(system);
  t.user = saw_marker ? std::move(user) : raw;
  if (!saw_marker) strip_last_nl(t.user);

  auto sys_names = scan_manifest(t.system);
  auto usr_names = scan_manifest(t.user);
  t.manifest = std::move(sys_names);
  for (auto& n : usr_names) {
    if (std::find(t.manifest.begin(), t.manifest.end(), n) == t.manifest.end()) {
      t.manifest.push_back(std::move(n));
    }
  }
  return t;
}

const std::vector<std::string>& TemplateSet::shipped_ids() {
  static const std::vector<std::string> ids = {
      "session_summary", "update", "answer_detective", "answer_open_qa",
      "answer_claim"};
  return ids;
}

TemplateSet TemplateSet::load(const std::string& dir) {
  TemplateSet set;
  for (const auto& id : shipped_ids()) {
    const std::string path = dir + "/" + id + ".txt";
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open template file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    set.templates_.emplace(id, parse_template(id, buf.str()));
  }
  return set;
}

TemplateSet TemplateSet::load_default(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return load(explicit_dir);
  if (const char* env = std::getenv("MIA_TEMPLATES_DIR"); env && *env) {
    return load(env);
  }
  const std::string compiled = MIA_TEMPLATE_DIR;
  if (compiled.empty()) {
    raise(ErrorCode::ConfigError, "no template directory configured");
  }
  return load(compiled);
}

const PromptTemplate& TemplateSet::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) {
    raise(ErrorCode::ConfigError, "unknown template id '" + id + "'");
  }
  return it->second;
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "detective") return TaskKind::Detective;
  if (s == "open_qa") return TaskKind::OpenQA;
  if (s == "claim") return TaskKind::Claim;
  raise(ErrorCode::ConfigError, "unknown task kind '" + s + "'");
}

const char* task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::Detective: return "detective";
    case TaskKind::OpenQA: return "open_qa";
    case TaskKind::Claim: return "claim";
  }
  return "?";
}

std::string answer_template_id(TaskKind kind) {
  return std::string("answer_") + task_kind_name(kind);
}

namespace {

ParsedAnswer parse_detective(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    int depth = 0;
    for (std::size_t j = i; j < text.size(); ++j) {
      if (text[j] == '{') ++depth;
      if (text[j] == '}') --depth;
      if (depth == 0) {
        auto candidate = text.substr(i, j - i + 1);
        auto parsed = nlohmann::json::parse(candidate, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object() &&
            parsed.contains("answer") && parsed["answer"].is_string()) {
          std::string ans = trim(parsed["answer"].get<std::string>());
          if (ans.size() == 1) {
            char c = static_cast<char>(std::toupper(static_cast<unsigned char>(ans[0])));
            if (c >= 'A' && c <= 'D') {
              return ParsedAnswer{TaskKind::Detective, std::string(1, c)};
            }
          }
        }
        break;
      }
    }
  }
  raise(ErrorCode::UnparseableAnswer,
        "no JSON object with an A-D answer field found");
}

ParsedAnswer parse_claim(const std::string& text) {
  auto a = text.find("<answer>");
  auto b = text.find("</answer>");
  if (a == std::string::npos || b == std::string::npos || b < a) {
    raise(ErrorCode::UnparseableAnswer, "missing <answer> tag");
  }
  std::string inner = trim(std::string_view(text).substr(a + 8, b - a - 8));
  std::string upper;
  for (char c : inner) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "TRUE" || upper == "FALSE") {
    return ParsedAnswer{TaskKind::Claim, upper};
  }
  raise(ErrorCode::UnparseableAnswer, "<answer> tag is not TRUE/FALSE: " + inner);
}

}  // namespace

ParsedAnswer parse_answer(const std::string& text, TaskKind kind) {
  switch (kind) {
    case TaskKind::Detective: return parse_detective(text);
    case TaskKind::OpenQA: return ParsedAnswer{TaskKind::OpenQA, trim(text)};
    case TaskKind::Claim: return parse_claim(text);
  }
  raise(ErrorCode::InvalidArgument, "bad task kind");
}

}  // namespace mia
