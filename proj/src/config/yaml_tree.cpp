// Copyright 2026 The labci Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "config/yaml_tree.hpp"

#include <sstream>

#include <yaml-cpp/anchor.h>
#include <yaml-cpp/eventhandler.h>
#include <yaml-cpp/exceptions.h>
#include <yaml-cpp/mark.h>
#include <yaml-cpp/parser.h>

#include "common/error.hpp"

namespace labci::config {

namespace {

class TreeBuilder : public YAML::EventHandler {
 public:
  void OnDocumentStart(const YAML::Mark& mark) override {
    if (++documents_ > 1) {
      throw Error(Errc::kSyntax, "line " + std::to_string(mark.line + 1) +
                                     ": multi-document streams are not supported",
                  mark.line + 1);
    }
  }
  void OnDocumentEnd() override {}

  void OnNull(const YAML::Mark& mark, YAML::anchor_t anchor) override {
    reject_anchor(mark, anchor);
    YamlNode n;
    n.line = mark.line + 1;
    push_value(std::move(n));
  }

  void OnAlias(const YAML::Mark& mark, YAML::anchor_t) override {
    throw Error(Errc::kSyntax,
                "line " + std::to_string(mark.line + 1) + ": aliases are not supported",
                mark.line + 1);
  }

  void OnAnchor(const YAML::Mark& mark, const std::string&) override {
    reject_anchor(mark, 1);
  }

  void OnScalar(const YAML::Mark& mark, const std::string&, YAML::anchor_t anchor,
                const std::string& value) override {
    reject_anchor(mark, anchor);
    YamlNode n;
    n.kind = YamlNode::Kind::kScalar;
    n.scalar = value;
    n.line = mark.line + 1;
    push_value(std::move(n));
  }

  void OnSequenceStart(const YAML::Mark& mark, const std::string&, YAML::anchor_t anchor,
                       YAML::EmitterStyle::value) override {
    reject_anchor(mark, anchor);
    Frame f;
    f.node.kind = YamlNode::Kind::kSequence;
    f.node.line = mark.line + 1;
    stack_.push_back(std::move(f));
  }
  void OnSequenceEnd() override { pop_container(); }

  void OnMapStart(const YAML::Mark& mark, const std::string&, YAML::anchor_t anchor,
                  YAML::EmitterStyle::value) override {
    reject_anchor(mark, anchor);
    Frame f;
    f.node.kind = YamlNode::Kind::kMap;
    f.node.line = mark.line + 1;
    stack_.push_back(std::move(f));
  }
  void OnMapEnd() override { pop_container(); }

  YamlNode take_root() { return std::move(root_); }

 private:
  struct Frame {
    YamlNode node;
    bool has_key = false;
    YamlNode key;
  };

  static void reject_anchor(const YAML::Mark& mark, YAML::anchor_t anchor) {
    if (anchor != YAML::NullAnchor) {
      throw Error(Errc::kSyntax,
                  "line " + std::to_string(mark.line + 1) + ": anchors are not supported",
                  mark.line + 1);
    }
  }

  void pop_container() {
    Frame f = std::move(stack_.back());
    stack_.pop_back();
    push_value(std::move(f.node));
  }

  void push_value(YamlNode n) {
    if (stack_.empty()) {
      root_ = std::move(n);
      return;
    }
    Frame& top = stack_.back();
    if (top.node.is_sequence()) {
      top.node.items.push_back(std::move(n));
    } else if (!top.has_key) {
      if (!n.is_scalar()) {
        throw Error(Errc::kSyntax,
                    "line " + std::to_string(n.line) + ": mapping keys must be plain scalars",
                    n.line);
      }
      top.key = std::move(n);
      top.has_key = true;
    } else {
      top.node.entries.emplace_back(std::move(top.key), std::move(n));
      top.has_key = false;
    }
  }

  int documents_ = 0;
  std::vector<Frame> stack_;
  YamlNode root_;
};

}  // namespace

YamlNode parse_yaml_subset(std::string_view text) {
  std::istringstream in{std::string(text)};
  TreeBuilder builder;
  try {
    YAML::Parser parser(in);
    while (parser.HandleNextDocument(builder)) {
    }
  } catch (const YAML::Exception& e) {
    int line = e.mark.is_null() ? 0 : e.mark.line + 1;
    throw Error(Errc::kSyntax, "line " + std::to_string(line) + ": " + e.msg, line);
  }
  return builder.take_root();
}

}  // namespace labci::config
