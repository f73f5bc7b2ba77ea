#pragma once

#include <string>
#include <string_view>

namespace lbcnn {

enum class PolyFamily { chebyshev, laguerre, hermite };

inline constexpr PolyFamily kAllFamilies[] = {PolyFamily::chebyshev, PolyFamily::laguerre, PolyFamily::hermite};

std::string to_string(PolyFamily family);
/// Accepts "chebyshev", "laguerre", "hermite"; throws InputError otherwise.
PolyFamily parse_family(std::string_view name);

}  // namespace lbcnn
