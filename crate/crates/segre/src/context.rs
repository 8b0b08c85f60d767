//! Declaration context: coordinates, formal functions, constants.
//!
//! Coordinate order is fixed at load time; identifiers are unique across the
//! three namespaces. Contexts only ever grow by appending, so atom ids inside
//! existing expressions stay valid when a context is extended (e.g. with
//! Pfaffian parameters).

use crate::atom::{ConstId, CoordId, FuncId};
use crate::error::ScalarError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coordinate {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalFunction {
    pub name: String,
    /// Unary: every formal function depends on exactly one coordinate.
    pub arg: CoordId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    pub coords: Vec<Coordinate>,
    pub funcs: Vec<FormalFunction>,
    pub consts: Vec<String>,
}

impl Context {
    pub fn new() -> Self {
        Context::default()
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn check_fresh(&self, name: &str) -> Result<(), ScalarError> {
        let taken = self.coords.iter().any(|c| c.name == name)
            || self.funcs.iter().any(|f| f.name == name)
            || self.consts.iter().any(|c| c == name)
            || matches!(name, "exp" | "log" | "D");
        if taken {
            Err(ScalarError::DuplicateIdentifier(name.to_string()))
        } else {
            Ok(())
        }
    }

    pub fn add_coord(&mut self, name: &str) -> Result<CoordId, ScalarError> {
        self.check_fresh(name)?;
        self.coords.push(Coordinate {
            name: name.to_string(),
        });
        Ok(self.coords.len() - 1)
    }

    pub fn add_func(&mut self, name: &str, arg_name: &str) -> Result<FuncId, ScalarError> {
        self.check_fresh(name)?;
        let arg = self
            .coord_id(arg_name)
            .ok_or_else(|| ScalarError::UndeclaredIdentifier(arg_name.to_string()))?;
        self.funcs.push(FormalFunction {
            name: name.to_string(),
            arg,
        });
        Ok(self.funcs.len() - 1)
    }

    pub fn add_const(&mut self, name: &str) -> Result<ConstId, ScalarError> {
        self.check_fresh(name)?;
        self.consts.push(name.to_string());
        Ok(self.consts.len() - 1)
    }

    pub fn coord_id(&self, name: &str) -> Option<CoordId> {
        self.coords.iter().position(|c| c.name == name)
    }

    pub fn func_id(&self, name: &str) -> Option<FuncId> {
        self.funcs.iter().position(|f| f.name == name)
    }

    pub fn const_id(&self, name: &str) -> Option<ConstId> {
        self.consts.iter().position(|c| c == name)
    }

    pub fn coord_name(&self, id: CoordId) -> &str {
        &self.coords[id].name
    }

    pub fn func_name(&self, id: FuncId) -> &str {
        &self.funcs[id].name
    }

    pub fn const_name(&self, id: ConstId) -> &str {
        &self.consts[id]
    }
}
