#pragma once

// Taxonomy of body hits: gesture, hand part, struck location and dynamics,
// plus the mapping from labels to network targets.

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pgr {

enum class Gesture { hit, scrape };
enum class HandPart { heel, thumb, fingers, nails };
enum class Location { soundhole, upper_bout, lower_bout, upper_side, lower_side };
enum class Dynamics { p, mp, mf, f };

inline constexpr std::array<HandPart, 4> kHandParts{HandPart::heel, HandPart::thumb, HandPart::fingers,
                                                   HandPart::nails};
inline constexpr std::array<Location, 5> kLocations{Location::soundhole, Location::upper_bout, Location::lower_bout,
                                                   Location::upper_side, Location::lower_side};
inline constexpr std::array<Dynamics, 4> kDynamics{Dynamics::p, Dynamics::mp, Dynamics::mf, Dynamics::f};

inline constexpr std::array<std::string_view, 4> kHandPartNames{"heel", "thumb", "fingers", "nails"};
inline constexpr std::array<std::string_view, 5> kLocationNames{"soundhole", "upper_bout", "lower_bout",
                                                                "upper_side", "lower_side"};
inline constexpr std::array<std::string_view, 4> kDynamicsNames{"p", "mp", "mf", "f"};
inline constexpr std::array<std::string_view, 2> kKickNames{"kick", "non_kick"};

/// Recording channel order.
inline constexpr std::array<std::string_view, 6> kChannelRoles{"magnetic",         "piezo_soundhole",
                                                               "piezo_upper_bout", "piezo_lower_bout",
                                                               "piezo_upper_side", "piezo_lower_side"};

inline std::string_view to_string(Gesture g) { return g == Gesture::hit ? "hit" : "scrape"; }
inline std::string_view to_string(HandPart h) { return kHandPartNames[static_cast<std::size_t>(h)]; }
inline std::string_view to_string(Location l) { return kLocationNames[static_cast<std::size_t>(l)]; }
inline std::string_view to_string(Dynamics d) { return kDynamicsNames[static_cast<std::size_t>(d)]; }

namespace detail {
template <class E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(s) + "'");
}
}  // namespace detail

inline HandPart parse_hand_part(std::string_view s) { return detail::parse_enum<HandPart>(s, kHandPartNames, "hand_part"); }
inline Location parse_location(std::string_view s) { return detail::parse_enum<Location>(s, kLocationNames, "location"); }
inline Dynamics parse_dynamics(std::string_view s) { return detail::parse_enum<Dynamics>(s, kDynamicsNames, "dynamics"); }
inline Gesture parse_gesture(std::string_view s) {
  if (s == "hit") return Gesture::hit;
  if (s == "scrape") return Gesture::scrape;
  throw std::invalid_argument("unknown gesture '" + std::string(s) + "'");
}

struct HitLabel {
  Gesture gesture = Gesture::hit;
  HandPart hand_part = HandPart::heel;
  Location location = Location::soundhole;
  Dynamics dynamics = Dynamics::f;

  /// Heel hits imitate a kick drum; everything else is non-kick.
  bool is_kick() const { return hand_part == HandPart::heel; }
  bool operator==(const HitLabel&) const = default;
};

using Combination = std::pair<HandPart, Location>;

/// Hand/location pairs that cannot be played. Heel on the lower side is
/// the default; callers can supply their own list.
inline std::vector<Combination> default_exclusions() { return {{HandPart::heel, Location::lower_side}}; }

inline bool is_excluded(const HitLabel& l, const std::vector<Combination>& excl) {
  return std::find(excl.begin(), excl.end(), Combination{l.hand_part, l.location}) != excl.end();
}

/// Which labels a network is trained to predict.
enum class Task { kick2, hand4, hierarchical };

inline std::size_t class_count(Task t) { return t == Task::kick2 ? 2 : 4; }

inline std::size_t class_index(const HitLabel& l, Task t) {
  if (t == Task::kick2) return l.is_kick() ? 0 : 1;
  return static_cast<std::size_t>(l.hand_part);
}

inline std::size_t location_index(const HitLabel& l) { return static_cast<std::size_t>(l.location); }

inline std::vector<std::string> class_names(Task t) {
  if (t == Task::kick2) return {std::string(kKickNames[0]), std::string(kKickNames[1])};
  return {kHandPartNames.begin(), kHandPartNames.end()};
}

inline std::vector<std::string> location_names() { return {kLocationNames.begin(), kLocationNames.end()}; }

/// Stratification key: the full target tuple for the task.
inline std::size_t strata_key(const HitLabel& l, Task t) {
  return t == Task::hierarchical ? class_index(l, t) * 5 + location_index(l) : class_index(l, t);
}

enum class Facet { dynamics, location, hand_part };

inline std::string_view to_string(Facet f) {
  switch (f) {
    case Facet::dynamics: return "dynamics";
    case Facet::location: return "location";
    case Facet::hand_part: return "hand_part";
  }
  return "?";
}

inline Facet parse_facet(std::string_view s) {
  if (s == "dynamics") return Facet::dynamics;
  if (s == "location") return Facet::location;
  if (s == "hand_part") return Facet::hand_part;
  throw std::invalid_argument("unknown facet '" + std::string(s) + "'");
}

inline std::vector<std::string> facet_values(Facet f) {
  switch (f) {
    case Facet::dynamics: return {kDynamicsNames.begin(), kDynamicsNames.end()};
    case Facet::location: return {kLocationNames.begin(), kLocationNames.end()};
    case Facet::hand_part: return {kHandPartNames.begin(), kHandPartNames.end()};
  }
  return {};
}

inline std::size_t facet_index(const HitLabel& l, Facet f) {
  switch (f) {
    case Facet::dynamics: return static_cast<std::size_t>(l.dynamics);
    case Facet::location: return static_cast<std::size_t>(l.location);
    case Facet::hand_part: return static_cast<std::size_t>(l.hand_part);
  }
  return 0;
}

}  // namespace pgr
