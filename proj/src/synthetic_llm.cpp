#include "archevo/synthetic_llm.hpp"

#include <algorithm>
#include <cmath>

namespace archevo {

std::string render_model_source(const SurrogateDescriptor& d) {
  std::string tags = "(";
  for (std::size_t i = 0; i < d.tags.size(); ++i) tags += (i ? ", '" : "'") + d.tags[i] + "'";
  tags += d.tags.size() == 1 ? ",)" : ")";
  std::string src;
  src += "import torch\nimport torch.nn as nn\n\n";
  src += format_descriptor(d) + "\n\n\n";
  src += "class Block(nn.Module):\n";
  src += "    def __init__(self, channels, tags=()):\n";
  src += "        super().__init__()\n";
  src += "        self.conv = nn.Conv2d(channels, channels, 3, padding=1, bias=False)\n";
  src += "        self.bn = nn.BatchNorm2d(channels)\n";
  src += "        self.act = nn.ReLU(inplace=True)\n\n";
  src += "    def forward(self, x):\n";
  src += "        return x + self.act(self.bn(self.conv(x)))\n\n\n";
  src += "class Network(nn.Module):\n";
  src += "    def __init__(self, num_classes=10, depth=" + std::to_string(d.depth) +
         ", width=" + std::to_string(d.width) + "):\n";
  src += "        super().__init__()\n";
  src += "        self.stem = nn.Conv2d(3, width, 3, padding=1, bias=False)\n";
  src += "        self.layers = nn.Sequential(*[Block(width, " + tags + ") for _ in range(depth)])\n";
  src += "        self.pool = nn.AdaptiveAvgPool2d(1)\n";
  src += "        self.fc = nn.Linear(width, num_classes)\n\n";
  src += "    def forward(self, x):\n";
  src += "        x = self.layers(self.stem(x))\n";
  src += "        return self.fc(torch.flatten(self.pool(x), 1))\n";
  return src;
}

namespace {

std::string after(std::string_view text, std::string_view marker) {
  const auto pos = text.find(marker);
  if (pos == std::string_view::npos) return {};
  return std::string(text.substr(pos + marker.size()));
}

// Text between two markers (or to the end when `end` is absent).
std::string between(std::string_view text, std::string_view begin, std::string_view end) {
  const std::string tail = after(text, begin);
  const auto stop = tail.find(end);
  return stop == std::string::npos ? tail : tail.substr(0, stop);
}

std::string answer(std::string_view plan, const std::string& code) {
  return std::string(plan) + "\n\n```python\n" + code + "```\n";
}

void add_tag(SurrogateDescriptor& d, const std::string& tag) {
  if (std::find(d.tags.begin(), d.tags.end(), tag) == d.tags.end()) d.tags.push_back(tag);
}

// Tag suggested by the idea text, if any.
std::string tag_for(std::string_view idea, Rng& rng) {
  const std::string t = to_lower(idea);
  if (t.find("attention") != std::string::npos || t.find("transformer") != std::string::npos) return "attn";
  if (t.find("squeeze") != std::string::npos || t.find("se block") != std::string::npos) return "se";
  if (t.find("depthwise") != std::string::npos) return "dwconv";
  if (t.find("mlp") != std::string::npos) return "mlp";
  static const std::vector<std::string> kOther = {"gn", "skip", "dropout", "attn", "se", "dwconv", "mlp", "gelu"};
  return rng.pick(kOther);
}

std::string broken(const SurrogateDescriptor& d, Rng& rng) {
  std::string code = render_model_source(d);
  if (rng.bernoulli(0.5)) {
    const auto pos = code.find("#SURROGATE");
    code.replace(pos, code.find('\n', pos) - pos, "#SURROGATE depth=x width=" + std::to_string(d.width));
  } else {
    const auto pos = code.find("#SURROGATE");
    code.erase(pos, code.find('\n', pos) - pos + 1);
  }
  return code;
}

std::string mutate_answer(const SurrogateDescriptor& parent, const std::string& parent_code,
                          std::string_view idea, bool grow, const SyntheticOptions& o, Rng& rng) {
  if (rng.bernoulli(o.echo)) return answer("The model already follows the idea.", parent_code);
  SurrogateDescriptor d = parent;
  if (rng.bernoulli(o.oversize)) {
    d.width = parent.width * 2 + 8;
    d.depth = parent.depth + 2;
  } else if (grow) {
    d.depth = parent.depth + static_cast<int>(rng.uniform_index(2));
    d.width = parent.width + 2 * static_cast<int>(1 + rng.uniform_index(4));
  } else {
    d.depth = std::max(2, parent.depth + static_cast<int>(rng.uniform_index(3)) - 1);
    d.width = std::max(1, parent.width + static_cast<int>(rng.uniform_index(5)) * 2 - 2);
  }
  add_tag(d, tag_for(idea, rng));
  if (d.depth == parent.depth && d.width == parent.width && d.tags == parent.tags) ++d.depth;
  if (rng.bernoulli(o.compile_fail)) return answer("Plan: insert the new block.", broken(d, rng));
  return answer("Plan: apply the idea to the base block, then adjust the network.",
                render_model_source(d));
}

std::string respond(const ChatRequest& req, const SyntheticOptions& o, Rng& rng) {
  const std::string system = req.system.value_or("");
  const std::string& user = req.user;

  if (system.find("debugging PyTorch code") != std::string::npos) {
    const std::string target = between(user, "Target model: ", "\n\nParent model: ");
    auto d = parse_descriptor(after(user, "\n\nParent model: "));
    if (!d) d = SurrogateDescriptor{3, 16, {}};
    if (auto t = parse_descriptor(target)) d = t;
    d->depth += 1;
    if (rng.bernoulli(o.debug_fail)) return answer("Fixed the shape mismatch.", broken(*d, rng));
    return answer("Fixed the shape mismatch.", render_model_source(*d));
  }

  if (system.find("reduce FLOPs and parameter size") != std::string::npos) {
    auto d = parse_descriptor(between(user, "Target model: ", "\n\nParent model: "));
    if (!d) d = SurrogateDescriptor{2, 8, {}};
    if (user.find("used only once") != std::string::npos) {
      d->width = std::max(1, static_cast<int>(std::floor(d->width * 0.7)));
      d->depth = std::max(2, d->depth - 1);
    } else if (user.find("number of repeats") != std::string::npos) {
      d->depth = std::max(2, d->depth - 1);
      if (d->depth == 2) d->width = std::max(1, d->width - 4);
    } else {
      d->width = std::max(1, static_cast<int>(std::floor(d->width * 0.85)));
    }
    if (rng.bernoulli(o.downscale_fail)) return answer("Reduced the channels.", broken(*d, rng));
    return answer("Reduced the channels.", render_model_source(*d));
  }

  if (user.rfind("The target model was mutated from the parent model.\n\nJudge", 0) == 0) {
    if (rng.bernoulli(o.unparsable_verdict)) return "The architecture looks reasonable.";
    const std::string target = between(user, "Target model: ", "\n\nParent model: ");
    const std::string parent = after(user, "\n\nParent model: ");
    if (collapse_whitespace(target) == collapse_whitespace(parent)) {
      return "The architecture is unchanged.\n##response##no";
    }
    return "The architecture changed and the block repeats.\n**response**yes";
  }

  if (user.find("Mutated model: ") != std::string::npos &&
      user.find("Changing from the parent model to the new model") != std::string::npos) {
    const std::string current = after(user, "Mutated model: ");
    auto d = parse_descriptor(current);
    if (!d) return "I cannot find the mutated model.";
    const bool improved = user.find("has improved the performance") != std::string::npos;
    return mutate_answer(*d, current, improved ? "scale up" : "attention", improved, o, rng);
  }

  if (system.find("Overall Instructions") != std::string::npos) {
    constexpr std::string_view kJoin = " Please modify the following model: ";
    const auto split_at = user.find(kJoin);
    if (split_at != std::string::npos) {
      const std::string idea = user.substr(0, split_at);
      const std::string parent_code = user.substr(split_at + kJoin.size());
      if (auto d = parse_descriptor(parent_code)) {
        const bool grow = idea.find("larger") != std::string::npos;
        return mutate_answer(*d, parent_code, idea, grow, o, rng);
      }
    }
    return "I cannot find the parent model.";
  }

  return "This request is outside what I can answer.\n##response##no";
}

}  // namespace

Responder make_synthetic_responder(std::uint64_t seed, SyntheticOptions options) {
  return [seed, options](const ChatRequest& req, std::uint64_t seq) {
    Rng rng(splitmix64(seed ^ fnv1a64(req.stream) ^ splitmix64(seq + 0x9e37)));
    return respond(req, options, rng);
  };
}

}  // namespace archevo
