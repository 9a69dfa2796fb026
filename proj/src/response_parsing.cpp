#include "archevo/response_parsing.hpp"

#include <vector>

#include "archevo/common.hpp"

namespace archevo {

std::string parse_tag_response(std::string_view response) {
  static constexpr std::string_view kMarkers[] = {"##response##", "**response**"};
  std::size_t best = std::string_view::npos;
  std::size_t marker_len = 0;
  const std::string lowered = to_lower(response);
  for (auto marker : kMarkers) {
    const std::size_t pos = lowered.rfind(marker);
    if (pos != std::string::npos && (best == std::string_view::npos || pos > best)) {
      best = pos;
      marker_len = marker.size();
    }
  }
  if (best == std::string_view::npos) throw ParseError("response has no ##response## marker");
  std::string_view tail = response.substr(best + marker_len);
  const std::size_t eol = tail.find('\n');
  if (eol != std::string_view::npos) tail = tail.substr(0, eol);
  return to_lower(trim(tail));
}

CodeBlock extract_code_block(std::string_view response) {
  // Fence lines start with ``` (after optional indentation). Pair them up in
  // order; the last complete pair wins.
  const auto lines = split_lines(response);
  std::vector<std::size_t> fences;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).rfind("```", 0) == 0) fences.push_back(i);
  }
  CodeBlock block;
  if (fences.size() >= 2) {
    const std::size_t pairs = fences.size() / 2;
    const std::size_t open = fences[2 * (pairs - 1)];
    const std::size_t close = fences[2 * (pairs - 1) + 1];
    for (std::size_t i = open + 1; i < close; ++i) {
      block.code += lines[i];
      block.code.push_back('\n');
    }
  } else if (fences.size() == 1) {
    // Unterminated fence, typically a truncated generation.
    for (std::size_t i = fences[0] + 1; i < lines.size(); ++i) {
      block.code += lines[i];
      block.code.push_back('\n');
    }
    block.low_confidence = true;
  } else {
    block.code = trim(response);
    block.low_confidence = true;
  }
  if (trim(block.code).empty()) throw ParseError("response holds no code");
  return block;
}

}  // namespace archevo
