#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Prompt pack: every prompt issued anywhere in the system is a plain-text
// template with {{placeholder}} slots, loaded from a directory so wording
// can be changed without recompiling.
// ---------------------------------------------------------------------------

class PromptPack {
 public:
  static const std::vector<std::string>& required_templates() {
    static const std::vector<std::string> names = {
        "knowledge", "persona",        "greeting",           "question",
        "merge",     "critic",         "critic_context",     "decision",
        "geval_coherence", "geval_faithfulness",
    };
    return names;
  }

  static PromptPack load(const std::filesystem::path& dir) {
    PromptPack pack;
    pack.dir_ = dir;
    for (const std::string& name : required_templates()) {
      const auto path = dir / (name + ".tmpl");
      if (!std::filesystem::exists(path)) {
        throw std::runtime_error("prompt pack missing template: " + path.string());
      }
      pack.templates_[name] = read_file(path);
    }
    return pack;
  }

  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& values) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw std::runtime_error("unknown prompt template: " + name);
    return render_template(it->second, values);
  }

  const std::string& raw(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw std::runtime_error("unknown prompt template: " + name);
    return it->second;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::map<std::string, std::string> templates_;
  std::filesystem::path dir_;
};

/// Prompt directory resolution: explicit argument beats TACITSIM_PROMPTS,
/// which beats the build-time default.
inline std::filesystem::path default_prompt_dir() {
  if (const char* env = std::getenv("TACITSIM_PROMPTS"); env && *env) return env;
#ifdef TACITSIM_PROMPT_DIR
  return TACITSIM_PROMPT_DIR;
#else
  return "prompts";
#endif
}

inline PromptPack load_default_prompts() { return PromptPack::load(default_prompt_dir()); }

}  // namespace tacitsim
