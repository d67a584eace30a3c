//! Symbolic call data and return values.
//!
//! Contracts are addressed by operation name plus a typed argument list
//! rather than by encoded bytecode.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Address, Amount, VmError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Unit,
    Bool(bool),
    Uint(u64),
    Int(i64),
    Amount(Amount),
    Address(Address),
    Text(String),
    List(Vec<Value>),
}

impl Value {
    pub fn as_uint(&self) -> Option<u64> {
        match self {
            Value::Uint(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_amount(&self) -> Option<Amount> {
        match self {
            Value::Amount(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_address(&self) -> Option<Address> {
        match self {
            Value::Address(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Uint(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Amount(v) => write!(f, "{v}wei"),
            Value::Address(v) => write!(f, "{v}"),
            Value::Text(v) => write!(f, "{v:?}"),
            Value::List(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Uint(v)
    }
}

impl From<Amount> for Value {
    fn from(v: Amount) -> Self {
        Value::Amount(v)
    }
}

impl From<Address> for Value {
    fn from(v: Address) -> Self {
        Value::Address(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

/// Operation name plus arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallData {
    pub method: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<Value>,
}

impl CallData {
    pub fn new(method: impl Into<String>, args: Vec<Value>) -> Self {
        CallData {
            method: method.into(),
            args,
        }
    }

    pub fn method(method: impl Into<String>) -> Self {
        Self::new(method, Vec::new())
    }

    fn arg(&self, index: usize) -> Result<&Value, VmError> {
        self.args
            .get(index)
            .ok_or_else(|| VmError::revert(format!("{}: missing argument {index}", self.method)))
    }

    fn bad_arg(&self, index: usize, expected: &str) -> VmError {
        VmError::revert(format!("{}: argument {index} must be {expected}", self.method))
    }

    pub fn uint(&self, index: usize) -> Result<u64, VmError> {
        self.arg(index)?
            .as_uint()
            .ok_or_else(|| self.bad_arg(index, "uint"))
    }

    pub fn opt_uint(&self, index: usize) -> Result<Option<u64>, VmError> {
        match self.args.get(index) {
            None => Ok(None),
            Some(_) => self.uint(index).map(Some),
        }
    }

    pub fn amount(&self, index: usize) -> Result<Amount, VmError> {
        self.arg(index)?
            .as_amount()
            .ok_or_else(|| self.bad_arg(index, "amount"))
    }

    pub fn address(&self, index: usize) -> Result<Address, VmError> {
        self.arg(index)?
            .as_address()
            .ok_or_else(|| self.bad_arg(index, "address"))
    }

    pub fn text(&self, index: usize) -> Result<&str, VmError> {
        self.arg(index)?
            .as_text()
            .ok_or_else(|| self.bad_arg(index, "text"))
    }
}

impl fmt::Display for CallData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.method)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{arg}")?;
        }
        write!(f, ")")
    }
}
