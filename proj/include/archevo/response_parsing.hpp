#pragma once

#include <string>
#include <string_view>

namespace archevo {

// Text after the last `##response##` or `**response**` marker, up to the end
// of that line, trimmed and lowercased. Throws ParseError when no marker is
// present.
std::string parse_tag_response(std::string_view response);

struct CodeBlock {
  std::string code;
  // True when the response had no fenced block and was taken whole.
  bool low_confidence = false;
};

// Contents of the last ``` fenced block; the whole trimmed response when no
// fence exists. Throws ParseError when the result is empty.
CodeBlock extract_code_block(std::string_view response);

}  // namespace archevo
