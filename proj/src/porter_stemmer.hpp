#pragma once

#include <string>
#include <string_view>

namespace cground {

/// Porter (1980) suffix-stripping stemmer for lowercase ASCII words.
/// Words of length <= 2 and words with non-letters are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace cground
