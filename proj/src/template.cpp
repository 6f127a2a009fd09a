#include "panel/template.hpp"

#include <algorithm>

#include "panel/error.hpp"

namespace panel {
namespace {

bool is_name_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}

bool is_name_char(char c) {
  return is_name_start(c) || (c >= '0' && c <= '9') || c == '.';
}

struct Tag {
  char sigil = 0;  // 0, '#' or '/'
  std::string name;
  std::size_t length = 0;  // bytes consumed including braces
};

// Recognizes `{name}`, `{#name}`, `{/name}` starting at text[pos] == '{'.
bool match_tag(std::string_view text, std::size_t pos, Tag& tag) {
  std::size_t i = pos + 1;
  char sigil = 0;
  if (i < text.size() && (text[i] == '#' || text[i] == '/')) {
    sigil = text[i];
    ++i;
  }
  if (i >= text.size() || !is_name_start(text[i])) return false;
  const std::size_t name_begin = i;
  while (i < text.size() && is_name_char(text[i])) ++i;
  if (i >= text.size() || text[i] != '}') return false;
  tag.sigil = sigil;
  tag.name = std::string(text.substr(name_begin, i - name_begin));
  tag.length = i + 1 - pos;
  return true;
}

}  // namespace

Template Template::parse(std::string_view text) {
  Template tpl;
  tpl.source_ = std::string(text);

  // Stack of open sections; the bottom entry is the root node list.
  std::vector<std::vector<Node>*> stack{&tpl.nodes_};
  std::vector<std::string> open_names;
  std::string literal;

  auto flush = [&] {
    if (!literal.empty()) {
      stack.back()->push_back(Node{Node::Kind::kText, std::move(literal), {}});
      literal.clear();
    }
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    Tag tag;
    if (text[pos] != '{' || !match_tag(text, pos, tag)) {
      literal.push_back(text[pos]);
      ++pos;
      continue;
    }
    flush();
    pos += tag.length;
    if (tag.sigil == 0) {
      stack.back()->push_back(Node{Node::Kind::kVariable, tag.name, {}});
    } else if (tag.sigil == '#') {
      stack.back()->push_back(Node{Node::Kind::kSection, tag.name, {}});
      stack.push_back(&stack.back()->back().children);
      open_names.push_back(tag.name);
    } else {
      if (open_names.empty() || open_names.back() != tag.name) {
        throw Error(ErrorCode::kTemplateSyntax,
                    "unexpected section close {/" + tag.name + "}");
      }
      open_names.pop_back();
      stack.pop_back();
    }
  }
  flush();
  if (!open_names.empty()) {
    throw Error(ErrorCode::kTemplateSyntax,
                "unclosed section {#" + open_names.back() + "}");
  }
  return tpl;
}

std::string Template::render(const TemplateContext& ctx) const {
  std::string out;
  out.reserve(source_.size() * 2);
  render_nodes(nodes_, ctx, out);
  return out;
}

void Template::render_nodes(const std::vector<Node>& nodes,
                            const TemplateContext& ctx, std::string& out) {
  for (const auto& node : nodes) {
    switch (node.kind) {
      case Node::Kind::kText:
        out += node.text;
        break;
      case Node::Kind::kVariable: {
        auto it = ctx.find(node.text);
        if (it == ctx.end()) {
          throw Error(ErrorCode::kUnboundPlaceholder,
                      "no binding for placeholder {" + node.text + "}");
        }
        out += it->second;
        break;
      }
      case Node::Kind::kSection:
        if (ctx.find(node.text) != ctx.end()) {
          render_nodes(node.children, ctx, out);
        }
        break;
    }
  }
}

void Template::walk(const std::vector<Node>& nodes,
                    const std::function<void(const Node&)>& fn) {
  for (const auto& node : nodes) {
    fn(node);
    if (node.kind == Node::Kind::kSection) walk(node.children, fn);
  }
}

std::vector<std::string> Template::variables() const {
  std::vector<std::string> names;
  walk(nodes_, [&](const Node& n) {
    if (n.kind == Node::Kind::kVariable &&
        std::find(names.begin(), names.end(), n.text) == names.end()) {
      names.push_back(n.text);
    }
  });
  return names;
}

std::vector<std::string> Template::sections() const {
  std::vector<std::string> names;
  walk(nodes_, [&](const Node& n) {
    if (n.kind == Node::Kind::kSection) names.push_back(n.text);
  });
  return names;
}

bool Template::references(std::string_view name) const {
  bool found = false;
  walk(nodes_, [&](const Node& n) {
    if (n.kind != Node::Kind::kText && n.text == name) found = true;
  });
  return found;
}

}  // namespace panel
