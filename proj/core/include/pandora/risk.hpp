#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace pandora {

/// Regional infection risk, ordered RiskFree < Low < Medium < High.
enum class RiskLevel : std::uint8_t { RiskFree = 0, Low = 1, Medium = 2, High = 3 };

inline constexpr std::size_t kRiskLevelCount = 4;

/// Label from the number of infections in the last 14 days:
/// 0 → RiskFree, 1..150 → Low, 151..750 → Medium, above 750 → High.
/// Throws std::invalid_argument for negative counts.
RiskLevel assign_risk_label(std::int64_t infected_14d);

/// "risk_free", "low", "medium", "high".
std::string to_string(RiskLevel level);
RiskLevel parse_risk_level(const std::string& text);

}  // namespace pandora
