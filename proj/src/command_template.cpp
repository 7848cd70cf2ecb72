#include "exr/command_template.hpp"

#include <algorithm>

#include "exr/errors.hpp"
#include "exr/model.hpp"

namespace exr {
namespace {

// Calls on_text for literal runs and on_key for each placeholder.
template <typename OnText, typename OnKey>
void scan(std::string_view text, OnText on_text, OnKey on_key) {
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            on_text("{");
            i += 2;
            continue;
        }
        if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            on_text("}");
            i += 2;
            continue;
        }
        if (c == '{' && (i == 0 || text[i - 1] != '$')) {
            const auto close = text.find('}', i + 1);
            if (close != std::string_view::npos) {
                const auto key = text.substr(i + 1, close - i - 1);
                if (is_parameter_key(key)) {
                    on_key(key);
                    i = close + 1;
                    continue;
                }
            }
        }
        on_text(text.substr(i, 1));
        ++i;
    }
}

}  // namespace

std::vector<std::string> placeholders(std::string_view text) {
    std::vector<std::string> keys;
    scan(
        text, [](std::string_view) {},
        [&](std::string_view key) {
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.emplace_back(key);
        });
    return keys;
}

std::string substitute(std::string_view text, const Variables& vars) {
    std::string out;
    out.reserve(text.size());
    scan(
        text, [&](std::string_view literal) { out.append(literal); },
        [&](std::string_view key) {
            const auto it = vars.find(std::string(key));
            if (it == vars.end())
                throw ReferenceError("unresolved placeholder {" + std::string(key) + "}");
            out.append(it->second);
        });
    return out;
}

}  // namespace exr
