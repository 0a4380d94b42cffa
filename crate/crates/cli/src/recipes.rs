//! Checked-in figure recipes, embedded at build time.

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const RECIPES: &[(&str, &str)] = &[
    ("fig3", include_str!("../../../recipes/fig3.json")),
    ("fig4", include_str!("../../../recipes/fig4.json")),
    ("fig5", include_str!("../../../recipes/fig5.json")),
    ("fig6", include_str!("../../../recipes/fig6.json")),
    ("fig9", include_str!("../../../recipes/fig9.json")),
    ("fig10", include_str!("../../../recipes/fig10.json")),
    ("fig11-12", include_str!("../../../recipes/fig11-12.json")),
    ("fig13", include_str!("../../../recipes/fig13.json")),
    ("fig14", include_str!("../../../recipes/fig14.json")),
    ("fig15", include_str!("../../../recipes/fig15.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    RECIPES.iter().map(|(n, _)| *n)
}

pub fn recipe(name: &str) -> Result<ExperimentConfig, CliError> {
    let (_, text) = RECIPES.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        CliError::Invalid(vec![aoi_core::Violation {
            field: "recipe".into(),
            message: format!("unknown recipe '{name}'; available: {}", names().collect::<Vec<_>>().join(", ")),
        }])
    })?;
    ExperimentConfig::from_json(text, None)
}
