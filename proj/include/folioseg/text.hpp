#pragma once

#include <string>
#include <string_view>

namespace folioseg {

/// Case- and diacritic-insensitive comparison key: ASCII lowercase, Latin-1
/// and Latin Extended-A letters reduced to their base letters, combining
/// marks dropped, whitespace trimmed and collapsed.
std::string fold_text(std::string_view text);

/// Folded text restricted to [a-z0-9_], used to mint stable ids.
std::string slugify(std::string_view text);

}  // namespace folioseg
