//! System-definition files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stabkit::expr::{self, ParseOptions};
use stabkit::floquet::PeriodicSystem;
use stabkit::odeint::MatrixFn;
use stabkit::{DiscreteSystem, Expr, ExprMatrix, Matrix, SystemDef};

/// Path of the published schema, quoted in input error messages.
pub const SYSTEM_SCHEMA: &str = "docs/schema/system.schema.json";

/// Bad input: unreadable file, schema violation, malformed flag. Maps to
/// exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Linear,
    Nonlinear,
    Delay,
    Periodic,
    Discrete,
}

/// A matrix entry: a number or an expression in `t` and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub b: Vec<Vec<f64>>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub lag: f64,
    pub matrix: Vec<Vec<Entry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub kind: SystemKind,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Entry>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delays: Vec<DelaySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

/// What a file describes once built.
#[derive(Debug, Clone)]
pub enum Model {
    Continuous(SystemDef),
    Periodic(PeriodicSystem),
    Discrete(DiscreteSystem),
}

type Checked<T> = Result<T, InputError>;

fn bad<T>(msg: impl Into<String>) -> Checked<T> {
    Err(InputError(msg.into()))
}

impl SystemFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
        let file: SystemFile = serde_json::from_str(&text)
            .map_err(|e| input_error(format!("{}: {e} (see {SYSTEM_SCHEMA})", path.display())))?;
        file.validate()
            .map_err(|e| input_error(format!("{}: {e} (see {SYSTEM_SCHEMA})", path.display())))?;
        Ok(file)
    }

    /// Structural checks the schema cannot express on its own.
    pub fn validate(&self) -> Checked<()> {
        let n = self.dimension;
        if n == 0 {
            return bad("dimension must be at least 1");
        }
        let has = |present: bool, field: &str, want: bool| -> Checked<()> {
            match (present, want) {
                (false, true) => bad(format!("kind {:?} requires `{field}`", self.kind)),
                (true, false) => bad(format!("kind {:?} does not allow `{field}`", self.kind)),
                _ => Ok(()),
            }
        };
        let (matrix, equations, input, delays, period) = match self.kind {
            SystemKind::Linear => (true, false, None, false, false),
            SystemKind::Nonlinear | SystemKind::Discrete => (false, true, Some(false), false, false),
            SystemKind::Delay => (true, false, Some(false), true, false),
            SystemKind::Periodic => (true, false, Some(false), false, true),
        };
        has(self.matrix.is_some(), "matrix", matrix)?;
        has(self.equations.is_some(), "equations", equations)?;
        if let Some(allowed) = input {
            has(self.input.is_some(), "input", allowed)?;
        }
        has(!self.delays.is_empty(), "delays", delays)?;
        has(self.period.is_some(), "period", period)?;
        if let Some(m) = &self.matrix {
            check_square(m, n, "matrix")?;
        }
        for (i, d) in self.delays.iter().enumerate() {
            check_square(&d.matrix, n, &format!("delays[{i}].matrix"))?;
            if !(d.lag > 0.0 && d.lag.is_finite()) {
                return bad(format!("delays[{i}].lag must be positive"));
            }
        }
        if let Some(eqs) = &self.equations {
            if eqs.len() != n {
                return bad(format!("{} equations for dimension {n}", eqs.len()));
            }
        }
        if let Some(p) = self.period {
            if !(p > 0.0 && p.is_finite()) {
                return bad("period must be positive");
            }
        }
        if let Some(inp) = &self.input {
            if inp.b.len() != n || inp.b.iter().any(|r| r.len() != inp.u.len()) {
                return bad("input.b must be dimension x len(input.u)");
            }
        }
        Ok(())
    }

    pub fn parse_options(&self) -> ParseOptions {
        let opts = ParseOptions::new().params(self.params.keys().cloned());
        if self.kind == SystemKind::Discrete {
            opts.time_alias("k")
        } else {
            opts
        }
    }

    /// Parses an expression in this file's variables and binds the parameters.
    pub fn expr(&self, text: &str) -> Checked<Expr> {
        let e = expr::parse_with(text, &self.parse_options()).map_err(|e| InputError(format!("`{text}`: {e}")))?;
        let max = e.max_state_index();
        if max > self.dimension {
            return bad(format!(
                "`{text}` mentions x{max} but the dimension is {}",
                self.dimension
            ));
        }
        Ok(e.bind_params(&self.params))
    }

    fn matrix_fn(&self, rows: &[Vec<Entry>], what: &str) -> Checked<MatrixFn> {
        let n = self.dimension;
        if rows.iter().flatten().all(|e| matches!(e, Entry::Number(_))) {
            let data = rows
                .iter()
                .flatten()
                .map(|e| match e {
                    Entry::Number(v) => *v,
                    Entry::Expr(_) => unreachable!(),
                })
                .collect();
            return Ok(MatrixFn::Constant(Matrix::from_row_major(n, n, data)));
        }
        let mut entries = Vec::with_capacity(n * n);
        for e in rows.iter().flatten() {
            let ex = match e {
                Entry::Number(v) => Expr::Number(*v),
                Entry::Expr(s) => self.expr(s)?,
            };
            if ex.max_state_index() > 0 {
                return bad(format!("{what} entries may depend on t only"));
            }
            entries.push(ex);
        }
        ExprMatrix::new(n, n, entries)
            .map(MatrixFn::TimeVarying)
            .map_err(|e| InputError(e.to_string()))
    }

    fn linear_part(&self) -> Checked<SystemDef> {
        let rows = self.matrix.as_ref().expect("validated");
        let sys = match self.matrix_fn(rows, "matrix")? {
            MatrixFn::Constant(a) => SystemDef::linear(a),
            MatrixFn::TimeVarying(p) => SystemDef::linear_time_varying(p),
        }
        .map_err(|e| InputError(e.to_string()))?;
        match &self.input {
            Some(inp) => sys
                .with_input(Matrix::from_rows(&inp.b), inp.u.clone())
                .map_err(|e| InputError(e.to_string())),
            None => Ok(sys),
        }
    }

    pub fn build(&self) -> Checked<Model> {
        self.validate()?;
        let wrap = |e: stabkit::Error| InputError(e.to_string());
        Ok(match self.kind {
            SystemKind::Linear => Model::Continuous(self.linear_part()?),
            SystemKind::Nonlinear => {
                let eqs = self.equations.as_ref().expect("validated");
                let exprs = eqs.iter().map(|s| self.expr(s)).collect::<Checked<Vec<_>>>()?;
                Model::Continuous(SystemDef::nonlinear(exprs).map_err(wrap)?)
            }
            SystemKind::Delay => {
                let mut sys = self.linear_part()?;
                for (i, d) in self.delays.iter().enumerate() {
                    let coeff = self.matrix_fn(&d.matrix, &format!("delays[{i}].matrix"))?;
                    sys = sys.with_delay(d.lag, coeff).map_err(wrap)?;
                }
                Model::Continuous(sys)
            }
            SystemKind::Periodic => {
                let sys = self
                    .linear_part()?
                    .with_period(self.period.expect("validated"))
                    .map_err(wrap)?;
                Model::Periodic(PeriodicSystem::from_system(sys).map_err(wrap)?)
            }
            SystemKind::Discrete => {
                let eqs = self.equations.as_ref().expect("validated");
                let exprs = eqs.iter().map(|s| self.expr(s)).collect::<Checked<Vec<_>>>()?;
                Model::Discrete(DiscreteSystem::new(exprs).map_err(wrap)?)
            }
        })
    }
}

fn check_square(m: &[Vec<Entry>], n: usize, what: &str) -> Checked<()> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return bad(format!("{what} must be {n} x {n}"));
    }
    Ok(())
}

/// Parses a matrix given on the command line as JSON, e.g. `[[1,0],[0,"exp(-t)"]]`.
pub fn parse_matrix_arg(text: &str, what: &str) -> Checked<Vec<Vec<Entry>>> {
    serde_json::from_str(text).map_err(|e| InputError(format!("--{what}: expected a JSON matrix: {e}")))
}

/// Parses `1,2.5,-3` into numbers.
pub fn parse_vector_arg(text: &str, what: &str) -> Checked<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| InputError(format!("--{what}: `{s}` is not a number")))
        })
        .collect()
}

impl SystemFile {
    /// A matrix argument interpreted in this file's variables.
    pub fn matrix_arg(&self, rows: &[Vec<Entry>], what: &str) -> Checked<MatrixFn> {
        check_square(rows, self.dimension, what)?;
        self.matrix_fn(rows, what)
    }
}
