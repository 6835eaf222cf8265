//! Name-keyed registries for interchangeable strategies.
//!
//! Every algorithm family in the crate (density profiles, point sets, time
//! integrators, density estimators, maximal operators) implements a common
//! trait and registers a constructor under a stable name. Configuration files
//! and the CLI select implementations by that name.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::ParamMap;

pub type Constructor<T> = fn(&ParamMap) -> Result<Box<T>>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Constructor<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, ctor: Constructor<T>) -> &mut Self {
        self.entries.insert(name, ctor);
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn build(&self, name: &str, params: &ParamMap) -> Result<Box<T>> {
        let ctor = self.entries.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        ctor(params)
    }
}
