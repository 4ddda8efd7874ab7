//! Hierarchical, ordered, typed parameter lists.
//!
//! Every solver component reads its configuration from a [`ParameterList`].
//! Lists keep insertion order, distinguish integers from reals, and remember
//! which entries were read so that misspelled or ignored keys can be reported
//! after a solve through [`ParameterList::unused_entries`].
//!
//! Reading a sublist marks the sublist entry itself but none of its children.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};

use serde_json::{Map as JsonMap, Number, Value as Json};

use crate::error::ParamError;

/// Maximum nesting depth of a parameter list, counting the root as 1.
pub const MAX_DEPTH: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum ParameterValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    List(ParameterList),
}

impl ParameterValue {
    pub fn kind(&self) -> &'static str {
        match self {
            ParameterValue::Bool(_) => "boolean",
            ParameterValue::Int(_) => "integer",
            ParameterValue::Real(_) => "real",
            ParameterValue::Text(_) => "string",
            ParameterValue::List(_) => "sublist",
        }
    }

    fn depth(&self) -> usize {
        match self {
            ParameterValue::List(l) => l.depth(),
            _ => 0,
        }
    }
}

impl From<bool> for ParameterValue {
    fn from(v: bool) -> Self {
        ParameterValue::Bool(v)
    }
}
impl From<i64> for ParameterValue {
    fn from(v: i64) -> Self {
        ParameterValue::Int(v)
    }
}
impl From<i32> for ParameterValue {
    fn from(v: i32) -> Self {
        ParameterValue::Int(v as i64)
    }
}
impl From<f64> for ParameterValue {
    fn from(v: f64) -> Self {
        ParameterValue::Real(v)
    }
}
impl From<&str> for ParameterValue {
    fn from(v: &str) -> Self {
        ParameterValue::Text(v.to_string())
    }
}
impl From<String> for ParameterValue {
    fn from(v: String) -> Self {
        ParameterValue::Text(v)
    }
}
impl From<ParameterList> for ParameterValue {
    fn from(v: ParameterList) -> Self {
        ParameterValue::List(v)
    }
}

struct Entry {
    name: String,
    value: ParameterValue,
    used: AtomicBool,
}

impl Clone for Entry {
    fn clone(&self) -> Self {
        Entry {
            name: self.name.clone(),
            value: self.value.clone(),
            used: AtomicBool::new(self.used.load(Ordering::Relaxed)),
        }
    }
}

/// An ordered list of uniquely named, typed entries.
///
/// Equality is structural: names, order and values are compared, the
/// read-tracking flags are not.
#[derive(Clone, Default)]
pub struct ParameterList {
    entries: Vec<Entry>,
}

impl PartialEq for ParameterList {
    fn eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.value == b.value)
    }
}

impl fmt::Debug for ParameterList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.entries.iter().map(|e| (&e.name, &e.value)))
            .finish()
    }
}

impl ParameterList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Nesting depth, where a list without sublists has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.entries.iter().map(|e| e.value.depth()).max().unwrap_or(0)
    }

    /// Insert or overwrite `name`. An overwritten entry keeps its position
    /// and is reset to unread.
    pub fn set(
        &mut self,
        name: &str,
        value: impl Into<ParameterValue>,
    ) -> Result<&mut Self, ParamError> {
        if name.is_empty() {
            return Err(ParamError::EmptyName);
        }
        let value = value.into();
        if 1 + value.depth() > MAX_DEPTH {
            return Err(ParamError::DepthExceeded(MAX_DEPTH));
        }
        match self.entries.iter_mut().find(|e| e.name == name) {
            Some(e) => {
                e.value = value;
                e.used = AtomicBool::new(false);
            }
            None => self.entries.push(Entry {
                name: name.to_string(),
                value,
                used: AtomicBool::new(false),
            }),
        }
        Ok(self)
    }

    /// Builder-style [`set`](Self::set) for literal construction in code.
    ///
    /// # Panics
    /// On an empty name or a depth violation.
    pub fn with(mut self, name: &str, value: impl Into<ParameterValue>) -> Self {
        self.set(name, value).expect("invalid parameter");
        self
    }

    fn entry(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entry(name).is_some()
    }

    /// Read `name` without checking its kind. Marks the entry used.
    pub fn get(&self, name: &str) -> Option<&ParameterValue> {
        self.entry(name).map(|e| {
            e.used.store(true, Ordering::Relaxed);
            &e.value
        })
    }

    /// Stored value when present, otherwise `default`. The stored value must
    /// be of the same kind as `default`.
    pub fn get_or_default(
        &self,
        name: &str,
        default: ParameterValue,
    ) -> Result<ParameterValue, ParamError> {
        match self.get(name) {
            None => Ok(default),
            Some(v) if std::mem::discriminant(v) == std::mem::discriminant(&default) => {
                Ok(v.clone())
            }
            Some(v) => Err(ParamError::TypeMismatch {
                name: name.to_string(),
                stored: v.kind(),
                requested: default.kind(),
            }),
        }
    }

    fn mismatch(name: &str, stored: &ParameterValue, requested: &'static str) -> ParamError {
        ParamError::TypeMismatch {
            name: name.to_string(),
            stored: stored.kind(),
            requested,
        }
    }

    pub fn get_bool(&self, name: &str, default: bool) -> Result<bool, ParamError> {
        match self.get(name) {
            None => Ok(default),
            Some(ParameterValue::Bool(b)) => Ok(*b),
            Some(v) => Err(Self::mismatch(name, v, "boolean")),
        }
    }

    pub fn get_int(&self, name: &str, default: i64) -> Result<i64, ParamError> {
        match self.get(name) {
            None => Ok(default),
            Some(ParameterValue::Int(i)) => Ok(*i),
            Some(v) => Err(Self::mismatch(name, v, "integer")),
        }
    }

    /// Non-negative integer read as `usize`.
    pub fn get_count(&self, name: &str, default: usize) -> Result<usize, ParamError> {
        let v = self.get_int(name, default as i64)?;
        usize::try_from(v).map_err(|_| ParamError::TypeMismatch {
            name: name.to_string(),
            stored: "negative integer",
            requested: "count",
        })
    }

    pub fn get_real(&self, name: &str, default: f64) -> Result<f64, ParamError> {
        match self.get(name) {
            None => Ok(default),
            Some(ParameterValue::Real(x)) => Ok(*x),
            Some(v) => Err(Self::mismatch(name, v, "real")),
        }
    }

    pub fn get_text(&self, name: &str, default: &str) -> Result<String, ParamError> {
        match self.get(name) {
            None => Ok(default.to_string()),
            Some(ParameterValue::Text(s)) => Ok(s.clone()),
            Some(v) => Err(Self::mismatch(name, v, "string")),
        }
    }

    /// Nested list stored under `name`, if any.
    pub fn sublist(&self, name: &str) -> Result<Option<&ParameterList>, ParamError> {
        match self.get(name) {
            None => Ok(None),
            Some(ParameterValue::List(l)) => Ok(Some(l)),
            Some(v) => Err(Self::mismatch(name, v, "sublist")),
        }
    }

    /// Whether `name` has been read. `None` when absent.
    pub fn is_used(&self, name: &str) -> Option<bool> {
        self.entry(name).map(|e| e.used.load(Ordering::Relaxed))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// Dotted paths of every leaf entry never read, depth first in insertion
    /// order. Sublists are descended into whether or not they were read; an
    /// empty sublist that was never read is reported itself.
    pub fn unused_entries(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_unused("", &mut out);
        out
    }

    fn collect_unused(&self, prefix: &str, out: &mut Vec<String>) {
        for e in &self.entries {
            let path = if prefix.is_empty() {
                e.name.clone()
            } else {
                format!("{prefix}.{}", e.name)
            };
            match &e.value {
                ParameterValue::List(l) if !l.is_empty() => l.collect_unused(&path, out),
                _ => {
                    if !e.used.load(Ordering::Relaxed) {
                        out.push(path);
                    }
                }
            }
        }
    }

    /// Parse a JSON object document.
    pub fn from_text(document: &[u8]) -> Result<Self, ParamError> {
        let json: Json =
            serde_json::from_slice(document).map_err(|e| ParamError::Malformed(e.to_string()))?;
        match json {
            Json::Object(obj) => Self::from_json_object(&obj, "", 1),
            other => Err(ParamError::Unsupported {
                path: String::new(),
                kind: json_kind(&other),
            }),
        }
    }

    /// Build from an already parsed JSON value, which must be an object.
    pub fn from_json(value: &Json) -> Result<Self, ParamError> {
        match value {
            Json::Object(obj) => Self::from_json_object(obj, "", 1),
            other => Err(ParamError::Unsupported {
                path: String::new(),
                kind: json_kind(other),
            }),
        }
    }

    fn from_json_object(
        obj: &JsonMap<String, Json>,
        prefix: &str,
        depth: usize,
    ) -> Result<Self, ParamError> {
        if depth > MAX_DEPTH {
            return Err(ParamError::DepthExceeded(MAX_DEPTH));
        }
        let mut list = ParameterList::new();
        for (name, v) in obj {
            let path = if prefix.is_empty() {
                name.clone()
            } else {
                format!("{prefix}.{name}")
            };
            let value = match v {
                Json::Bool(b) => ParameterValue::Bool(*b),
                Json::Number(n) => number_value(n, &path)?,
                Json::String(s) => ParameterValue::Text(s.clone()),
                Json::Object(o) => {
                    ParameterValue::List(Self::from_json_object(o, &path, depth + 1)?)
                }
                other => {
                    return Err(ParamError::Unsupported {
                        path,
                        kind: json_kind(other),
                    })
                }
            };
            list.set(name, value)?;
        }
        Ok(list)
    }

    pub fn to_json(&self) -> Json {
        let mut obj = JsonMap::new();
        for e in &self.entries {
            let v = match &e.value {
                ParameterValue::Bool(b) => Json::Bool(*b),
                ParameterValue::Int(i) => Json::Number((*i).into()),
                ParameterValue::Real(x) => Number::from_f64(*x)
                    .map(Json::Number)
                    .unwrap_or_else(|| Json::String(x.to_string())),
                ParameterValue::Text(s) => Json::String(s.clone()),
                ParameterValue::List(l) => l.to_json(),
            };
            obj.insert(e.name.clone(), v);
        }
        Json::Object(obj)
    }

    /// Pretty-printed JSON. Non-finite reals are not representable in JSON
    /// and are written as strings.
    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("JSON serialization cannot fail")
    }
}

fn number_value(n: &Number, path: &str) -> Result<ParameterValue, ParamError> {
    if let Some(i) = n.as_i64() {
        Ok(ParameterValue::Int(i))
    } else if n.is_u64() {
        Err(ParamError::Unsupported {
            path: path.to_string(),
            kind: "integer out of 64-bit signed range",
        })
    } else {
        Ok(ParameterValue::Real(n.as_f64().expect("finite JSON number")))
    }
}

fn json_kind(v: &Json) -> &'static str {
    match v {
        Json::Null => "null",
        Json::Bool(_) => "boolean",
        Json::Number(_) => "number",
        Json::String(_) => "string",
        Json::Array(_) => "array",
        Json::Object(_) => "object",
    }
}
