//! Figure presets, embedded as TOML data.

use crate::config::ConfigError;

pub const PRESETS: [(&str, &str); 11] = [
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
    ("fig8-outage", include_str!("../presets/fig8-outage.toml")),
    ("fig9", include_str!("../presets/fig9.toml")),
    ("fig9-nocapture", include_str!("../presets/fig9-nocapture.toml")),
    ("fig10", include_str!("../presets/fig10.toml")),
    ("fig10-nocapture", include_str!("../presets/fig10-nocapture.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Raw TOML text of a preset.
pub fn get(name: &str) -> Result<&'static str, ConfigError> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text).ok_or_else(|| ConfigError::UnknownPreset {
        name: name.to_owned(),
        available: names().collect::<Vec<_>>().join(", "),
    })
}
