#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "distsurf/events.hpp"

namespace distsurf {

// Background activity, inceptive event, trailing event.
enum class NoiseClass : std::uint8_t { BA, IE, TE };

inline std::string_view to_string(NoiseClass c) {
  switch (c) {
    case NoiseClass::BA: return "BA";
    case NoiseClass::IE: return "IE";
    case NoiseClass::TE: return "TE";
  }
  return "?";
}

struct DenoiseConfig {
  Micros tau = 5000;
};

/// One class per event, aligned with stream.events. Each event is judged by
/// the gaps to its neighbours in the same pixel's history:
///   TE if the backward gap < tau; else IE if the forward gap < tau; else BA.
/// Missing neighbours (first/last event at a pixel) count as an infinite gap.
/// Polarity is not consulted.
inline std::vector<NoiseClass> classify(const EventStream& stream, const DenoiseConfig& cfg = {}) {
  if (cfg.tau <= 0) throw std::invalid_argument("tau must be positive");
  const auto& events = stream.events;
  const std::size_t n = events.size();
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  const std::size_t npix =
      static_cast<std::size_t>(stream.geometry.width) * static_cast<std::size_t>(stream.geometry.height);

  // prev[i]: index of the previous event at the same pixel.
  std::vector<std::size_t> last(npix, kNone);
  std::vector<std::size_t> prev(n, kNone);
  std::vector<std::size_t> next(n, kNone);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pix = static_cast<std::size_t>(events[i].y) *
                                static_cast<std::size_t>(stream.geometry.width) +
                            static_cast<std::size_t>(events[i].x);
    if (last[pix] != kNone) {
      prev[i] = last[pix];
      next[last[pix]] = i;
    }
    last[pix] = i;
  }

  std::vector<NoiseClass> classes(n, NoiseClass::BA);
  for (std::size_t i = 0; i < n; ++i) {
    const bool back_close = prev[i] != kNone && events[i].t - events[prev[i]].t < cfg.tau;
    const bool fwd_close = next[i] != kNone && events[next[i]].t - events[i].t < cfg.tau;
    classes[i] = back_close ? NoiseClass::TE : (fwd_close ? NoiseClass::IE : NoiseClass::BA);
  }
  return classes;
}

/// Window over [t_eval - delta_t, t_eval) keeping only IE and TE events.
/// `classes` must come from classify() on the same stream.
inline EventWindow denoised_window(const EventStream& stream, const std::vector<NoiseClass>& classes,
                                   Micros t_eval, Micros delta_t, Micros end_offset = 0) {
  detail::require_positive(delta_t);
  if (classes.size() != stream.size())
    throw std::invalid_argument("classification does not match stream");
  return detail::collect_window(stream, t_eval - delta_t + end_offset, t_eval + end_offset, t_eval,
                                delta_t,
                                [&](std::size_t i) { return classes[i] != NoiseClass::BA; });
}

/// Classification consults the full stream, including events outside the window.
inline EventWindow denoised_window(const EventStream& stream, Micros t_eval, Micros delta_t,
                                   const DenoiseConfig& cfg = {}) {
  return denoised_window(stream, classify(stream, cfg), t_eval, delta_t);
}

/// Denoised counterpart of window_pair().
inline std::pair<EventWindow, EventWindow> denoised_window_pair(
    const EventStream& stream, const std::vector<NoiseClass>& classes, Micros t_eval,
    Micros delta_t) {
  return {denoised_window(stream, classes, t_eval, delta_t),
          denoised_window(stream, classes, t_eval, delta_t, delta_t)};
}

/// Debug dump: the event CSV with a class column appended.
inline void write_classified(std::ostream& out, const EventStream& stream,
                             const std::vector<NoiseClass>& classes) {
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Event& e = stream.events[i];
    out << e.t << ',' << e.x << ',' << e.y << ',' << (e.p < 0 ? -1 : 1) << ','
        << to_string(classes[i]) << '\n';
  }
}

}  // namespace distsurf
