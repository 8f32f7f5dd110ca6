//! Prompt templates. Placeholders are written `{{name}}`; rendering fails on
//! a placeholder without a value so typos in edited templates surface early.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template {template} uses unknown placeholder {{{{{name}}}}}")]
    UnknownPlaceholder { template: String, name: String },
    #[error("cannot read prompt template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub analyze: String,
    pub generate: String,
    pub refine: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            analyze: include_str!("../../prompts/analyze.txt").to_string(),
            generate: include_str!("../../prompts/generate.txt").to_string(),
            refine: include_str!("../../prompts/refine.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    pub const FILE_NAMES: [&'static str; 3] = ["analyze.txt", "generate.txt", "refine.txt"];

    /// Loads `analyze.txt`, `generate.txt` and `refine.txt` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        Ok(Self {
            analyze: read("analyze.txt")?,
            generate: read("generate.txt")?,
            refine: read("refine.txt")?,
        })
    }

    /// `(file name, contents)` of the three templates.
    pub fn files(&self) -> [(&'static str, &str); 3] {
        [
            ("analyze.txt", &self.analyze),
            ("generate.txt", &self.generate),
            ("refine.txt", &self.refine),
        ]
    }
}

/// Substitutes every `{{name}}` in `template` with `values[name]`.
pub fn render(template_name: &str, template: &str, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
    let re = Regex::new(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}").expect("static pattern");
    if let Some(missing) = re
        .captures_iter(template)
        .map(|c| c[1].to_string())
        .find(|name| !values.contains_key(name.as_str()))
    {
        return Err(TemplateError::UnknownPlaceholder {
            template: template_name.to_string(),
            name: missing,
        });
    }
    Ok(re
        .replace_all(template, |c: &regex::Captures| values[&c[1]].clone())
        .into_owned())
}
