#pragma once
// Named proactivity presets.

#include "inner_thoughts/core.hpp"

namespace inner_thoughts::presets {

inline ProactivityConfig non_stop_chatter() {
    ProactivityConfig c;
    c.system1Prob = 0.7;
    c.imThreshold = 4.49;
    c.interruptThreshold = 4.8;
    c.proactiveTone = false;
    return c;
}

inline ProactivityConfig active_contributor() {
    ProactivityConfig c;
    c.system1Prob = 0.2;
    c.imThreshold = 3.59;
    c.interruptThreshold = 4.8;
    c.proactiveTone = true;
    return c;
}

inline ProactivityConfig selective_participant() {
    ProactivityConfig c;
    c.system1Prob = 0.0;
    c.imThreshold = 4.09;
    c.interruptThreshold = 5.0;
    c.proactiveTone = false;
    return c;
}

/// Settings used for simulated conversations: 1 system-1 and 2 system-2
/// thoughts per batch, motivation threshold 3.95, system-1 probability 0.1.
inline ProactivityConfig simulation() { return ProactivityConfig{}; }

inline std::optional<ProactivityConfig> by_name(std::string_view name) {
    if (name == "non_stop_chatter") return non_stop_chatter();
    if (name == "active_contributor") return active_contributor();
    if (name == "selective_participant") return selective_participant();
    if (name == "simulation") return simulation();
    return std::nullopt;
}

inline std::vector<std::string> names() {
    return {"non_stop_chatter", "active_contributor", "selective_participant", "simulation"};
}

}  // namespace inner_thoughts::presets
