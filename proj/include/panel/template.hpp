#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace panel {

using TemplateContext = std::map<std::string, std::string, std::less<>>;

/// Minimal prompt template.
///
/// Syntax:
///   {name}            substituted with ctx[name]; missing -> UnboundPlaceholder
///   {#name}...{/name} body kept only when ctx contains name
///
/// Names are `[A-Za-z_][A-Za-z0-9_.]*`. Any other brace is literal text, so
/// JSON examples inside a template need no escaping. Substituted values are
/// inserted as-is and never re-scanned.
class Template {
 public:
  Template() = default;

  static Template parse(std::string_view text);

  std::string render(const TemplateContext& ctx) const;

  // Variable names in order of first appearance (section bodies included).
  std::vector<std::string> variables() const;
  // Section names in document order.
  std::vector<std::string> sections() const;
  bool references(std::string_view name) const;

  const std::string& source() const noexcept { return source_; }
  bool empty() const noexcept { return nodes_.empty(); }

 private:
  struct Node {
    enum class Kind { kText, kVariable, kSection };
    Kind kind;
    std::string text;  // literal text or name
    std::vector<Node> children;
  };

  static void render_nodes(const std::vector<Node>& nodes,
                           const TemplateContext& ctx, std::string& out);
  static void walk(const std::vector<Node>& nodes,
                   const std::function<void(const Node&)>& fn);

  std::string source_;
  std::vector<Node> nodes_;
};

}  // namespace panel
