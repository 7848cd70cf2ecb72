#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace exr {

using Variables = std::map<std::string, std::string>;

// Placeholders are `{key}` where key is a parameter token. `${...}` is left
// alone so shell variable expansion keeps working, and `{{` / `}}` produce
// literal braces.

/// Placeholder names in order of first appearance, without duplicates.
std::vector<std::string> placeholders(std::string_view text);

/// Throws ReferenceError naming the first unresolved placeholder.
std::string substitute(std::string_view text, const Variables& vars);

}  // namespace exr
