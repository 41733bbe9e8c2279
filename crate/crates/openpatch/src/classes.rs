//! `classes.map`: one `<id>=<name>` line per known class.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use openpatch_core::ClassId;

use crate::error::FormatError;

pub const FILE_NAME: &str = "classes.map";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassMap {
    names: BTreeMap<ClassId, String>,
}

impl ClassMap {
    pub fn from_names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let names = names.into_iter().enumerate().map(|(i, n)| (ClassId(i as u32), n.into())).collect();
        Self { names }
    }

    pub fn name(&self, class: ClassId) -> Option<&str> {
        self.names.get(&class).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, &str)> {
        self.names.iter().map(|(&c, n)| (c, n.as_str()))
    }

    pub fn to_text(&self) -> String {
        self.names.iter().map(|(c, n)| format!("{c}={n}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut names = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, name) = line
                .split_once('=')
                .ok_or_else(|| FormatError::invalid(format!("classes.map line {}: expected <id>=<name>", n + 1)))?;
            let id: u32 = id
                .trim()
                .parse()
                .map_err(|_| FormatError::invalid(format!("classes.map line {}: bad class id `{id}`", n + 1)))?;
            if names.insert(ClassId(id), name.to_string()).is_some() {
                return Err(FormatError::invalid(format!("classes.map: class {id} listed twice")));
            }
        }
        Ok(Self { names })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}
