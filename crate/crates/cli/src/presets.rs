//! Experiment configs shipped with the binary.

/// `(name, text)` of every shipped preset.
pub const PRESETS: [(&str, &str); 7] = [
    ("impulse", include_str!("../presets/impulse.conf")),
    ("step", include_str!("../presets/step.conf")),
    ("plan", include_str!("../presets/plan.conf")),
    ("tracking", include_str!("../presets/tracking.conf")),
    ("tracking-slow", include_str!("../presets/tracking-slow.conf")),
    ("simulate", include_str!("../presets/simulate.conf")),
    ("frontier", include_str!("../presets/frontier.conf")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
