//! Flat `key = value` config files with `[section]` headers.
//!
//! ```text
//! [run]
//! preset = poisson
//! n = 10
//! backend = reshape
//!
//! [operator]
//! coeff.2.0.0 = "1"
//! rhs = "sin(pi*x)"
//!
//! [boundary]
//! bc.x.min = dirichlet "0"
//! bc.x.max = neumann "y*z"
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use spectracube::bc::BcKind;
use spectracube::drivers::{BoundarySpec, Func3, OperatorSpec, Preconditioner, ProblemSpec, Rhs, SolverOptions};
use spectracube::expr::{parse, Expr};
use spectracube::opdisc::{Coeff, DiffOperator3};
use spectracube::tensolve::Backend;
use spectracube::Error;

#[derive(Clone, Debug)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

/// Keys are `section.key`; keys before any header live in `run`.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, Entry>,
}

fn config_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut out = ConfigFile::default();
        let mut section = String::from("run");
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let l = strip_comment(raw).trim();
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line, "unterminated section header"))?
                    .trim();
                if !["run", "operator", "boundary", "solver"].contains(&name) {
                    return Err(config_err(line, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| config_err(line, "expected `key = value`"))?;
            let key = format!("{section}.{}", k.trim());
            if k.trim().is_empty() {
                return Err(config_err(line, "empty key"));
            }
            let entry = Entry {
                value: v.trim().to_string(),
                line,
            };
            if let Some(prev) = out.entries.insert(key.clone(), entry) {
                return Err(config_err(
                    line,
                    format!("duplicate key {key:?} (first on line {})", prev.line),
                ));
            }
        }
        Ok(out)
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }
}

fn unquote(e: &Entry) -> Result<String, Error> {
    let v = e.value.trim();
    match v.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        Some(inner) => Ok(inner.to_string()),
        None if !v.contains('"') => Ok(v.to_string()),
        None => Err(config_err(e.line, format!("badly quoted value {v}"))),
    }
}

fn expr_at(e: &Entry, src: &str) -> Result<Expr, Error> {
    parse(src).map_err(|err| config_err(e.line, err))
}

fn expr_func(expr: Expr) -> Func3 {
    Arc::new(move |x, y, z| expr.eval(x, y, z))
}

fn parse_num<T: std::str::FromStr>(e: &Entry, what: &str) -> Result<T, Error>
where
    T::Err: std::fmt::Display,
{
    unquote(e)?
        .parse()
        .map_err(|err| config_err(e.line, format!("invalid {what}: {err}")))
}

pub fn parse_degrees(e: &Entry) -> Result<[usize; 3], Error> {
    let v = unquote(e)?;
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let nums = parts
        .iter()
        .map(|p| {
            p.parse::<usize>()
                .map_err(|err| config_err(e.line, format!("invalid degree {p:?}: {err}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    match nums.as_slice() {
        [n] => Ok([*n; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(config_err(e.line, "degrees need one or three values")),
    }
}

/// What a config file describes.
pub enum Problem {
    Preset(String),
    Inline(Box<ProblemSpec>),
}

pub struct RunConfig {
    pub problem: Problem,
    pub degrees: Option<[usize; 3]>,
    pub backend: Option<Backend>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub solver: SolverTweaks,
}

/// Solver settings that apply on top of a preset or inline problem.
#[derive(Default, Clone)]
pub struct SolverTweaks {
    pub cp_rank: Option<usize>,
    pub split_identity: Option<bool>,
    pub restart: Option<usize>,
    pub tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_iterations: Option<usize>,
    pub preconditioner_none: bool,
    pub base_cap: Option<usize>,
    pub reshape_cap: Option<usize>,
}

impl SolverTweaks {
    pub fn apply(&self, s: &mut SolverOptions) {
        if let Some(r) = self.cp_rank {
            s.disc.cp_rank = Some(r);
        }
        if let Some(b) = self.split_identity {
            s.disc.split_identity = b;
        }
        if let Some(r) = self.restart {
            s.gmres.restart = r;
        }
        if let Some(t) = self.tol {
            s.gmres.tol = t;
        }
        if let Some(m) = self.max_outer {
            s.gmres.maxouter = m;
        }
        if self.max_iterations.is_some() {
            s.gmres.max_iterations = self.max_iterations;
        }
        if self.preconditioner_none {
            s.preconditioner = Preconditioner::None;
        }
        if let Some(c) = self.base_cap {
            s.recursive.base_cap = c;
        }
        if let Some(c) = self.reshape_cap {
            s.reshape_cap = c;
        }
    }
}

const MODE_NAMES: [&str; 3] = ["x", "y", "z"];

impl RunConfig {
    pub fn from_file(cfg: &ConfigFile) -> Result<Self, Error> {
        for (key, e) in &cfg.entries {
            let known = matches!(
                key.as_str(),
                "run.preset"
                    | "run.n"
                    | "run.degrees"
                    | "run.backend"
                    | "run.seed"
                    | "run.samples"
                    | "operator.rhs"
                    | "operator.exact"
                    | "solver.cp_rank"
                    | "solver.split_identity"
                    | "solver.gmres.restart"
                    | "solver.gmres.tol"
                    | "solver.gmres.max_outer"
                    | "solver.gmres.max_iterations"
                    | "solver.preconditioner"
                    | "solver.base_cap"
                    | "solver.reshape_cap"
            ) || key.starts_with("operator.coeff.")
                || key.starts_with("boundary.bc.");
            if !known {
                return Err(config_err(e.line, format!("unknown key {key:?}")));
            }
        }
        let degrees = match (cfg.get("run.n"), cfg.get("run.degrees")) {
            (Some(a), Some(_)) => return Err(config_err(a.line, "give either n or degrees, not both")),
            (Some(e), None) | (None, Some(e)) => Some(parse_degrees(e)?),
            (None, None) => None,
        };
        let backend = match cfg.get("run.backend") {
            Some(e) if unquote(e)? == "auto" => None,
            Some(e) => Some(unquote(e)?.parse::<Backend>().map_err(|err| config_err(e.line, err))?),
            None => None,
        };
        let seed = cfg.get("run.seed").map(|e| parse_num(e, "seed")).transpose()?;
        let samples = cfg
            .get("run.samples")
            .map(|e| parse_num(e, "sample count"))
            .transpose()?;
        let mut solver = SolverTweaks {
            cp_rank: cfg.get("solver.cp_rank").map(|e| parse_num(e, "CP rank")).transpose()?,
            split_identity: cfg
                .get("solver.split_identity")
                .map(|e| parse_num(e, "flag"))
                .transpose()?,
            restart: cfg
                .get("solver.gmres.restart")
                .map(|e| parse_num(e, "restart"))
                .transpose()?,
            tol: cfg
                .get("solver.gmres.tol")
                .map(|e| parse_num(e, "tolerance"))
                .transpose()?,
            max_outer: cfg
                .get("solver.gmres.max_outer")
                .map(|e| parse_num(e, "count"))
                .transpose()?,
            max_iterations: cfg
                .get("solver.gmres.max_iterations")
                .map(|e| parse_num(e, "count"))
                .transpose()?,
            base_cap: cfg.get("solver.base_cap").map(|e| parse_num(e, "cap")).transpose()?,
            reshape_cap: cfg.get("solver.reshape_cap").map(|e| parse_num(e, "cap")).transpose()?,
            preconditioner_none: false,
        };
        if let Some(e) = cfg.get("solver.preconditioner") {
            match unquote(e)?.as_str() {
                "none" => solver.preconditioner_none = true,
                "surrogate" => {}
                other => return Err(config_err(e.line, format!("unknown preconditioner {other:?}"))),
            }
        }
        let inline_keys = cfg
            .entries
            .iter()
            .find(|(k, _)| k.starts_with("operator.") || k.starts_with("boundary."));
        let problem = match (cfg.get("run.preset"), inline_keys) {
            (Some(p), None) => Problem::Preset(unquote(p)?),
            (Some(p), Some(_)) => {
                return Err(config_err(
                    p.line,
                    "a config gives either a preset or an inline problem, not both",
                ))
            }
            (None, Some(_)) => {
                let deg = degrees.ok_or_else(|| Error::Config("inline problems need `n` or `degrees`".into()))?;
                Problem::Inline(Box::new(inline_problem(cfg, deg)?))
            }
            (None, None) => {
                return Err(Error::Config(
                    "config names neither a preset nor an inline problem".into(),
                ))
            }
        };
        Ok(RunConfig {
            problem,
            degrees,
            backend,
            seed,
            samples,
            solver,
        })
    }
}

fn inline_problem(cfg: &ConfigFile, degrees: [usize; 3]) -> Result<ProblemSpec, Error> {
    let mut coeffs = Vec::new();
    for (key, e) in cfg.entries.range("operator.coeff.".to_string()..) {
        let Some(idx) = key.strip_prefix("operator.coeff.") else {
            break;
        };
        let parts: Vec<usize> = idx
            .split('.')
            .map(|p| p.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| config_err(e.line, format!("coefficient key must be coeff.a.b.c, got {key:?}")))?;
        let [a, b, c] = parts[..] else {
            return Err(config_err(
                e.line,
                format!("coefficient key must be coeff.a.b.c, got {key:?}"),
            ));
        };
        let src = unquote(e)?;
        let ex = expr_at(e, &src)?;
        let coeff = match ex.constant_value() {
            Some(v) => Coeff::Const(v),
            None => Coeff::Expr(ex),
        };
        coeffs.push(([a, b, c], coeff, e.line));
    }
    if coeffs.is_empty() {
        return Err(Error::Config("inline operator has no coefficients".into()));
    }
    let orders: [usize; 3] = std::array::from_fn(|m| coeffs.iter().map(|(i, _, _)| i[m]).max().unwrap_or(0));
    let mut op = DiffOperator3::new(orders);
    for (idx, c, line) in coeffs {
        op.set(idx, c).map_err(|err| config_err(line, err))?;
    }
    op.validate()?;
    let rhs_entry = cfg
        .get("operator.rhs")
        .ok_or_else(|| Error::Config("inline problem needs operator.rhs".into()))?;
    let rhs = expr_func(expr_at(rhs_entry, &unquote(rhs_entry)?)?);
    let exact = match cfg.get("operator.exact") {
        Some(e) => Some(expr_func(expr_at(e, &unquote(e)?)?)),
        None => None,
    };
    let mut boundary = BoundarySpec::default();
    for (key, e) in cfg.entries.range("boundary.bc.".to_string()..) {
        let Some(face) = key.strip_prefix("boundary.bc.") else {
            break;
        };
        let (axis, side) = face
            .split_once('.')
            .ok_or_else(|| config_err(e.line, format!("face key must be bc.<x|y|z>.<min|max>, got {key:?}")))?;
        let mode = MODE_NAMES
            .iter()
            .position(|n| *n == axis)
            .ok_or_else(|| config_err(e.line, format!("unknown axis {axis:?}")))?
            + 1;
        let side = match side {
            "min" => -1.0,
            "max" => 1.0,
            other => return Err(config_err(e.line, format!("unknown side {other:?}; use min or max"))),
        };
        let v = e.value.trim();
        let (kind, rest) = v.split_once(char::is_whitespace).unwrap_or((v, ""));
        let kind = match kind {
            "dirichlet" => BcKind::Dirichlet,
            "neumann" => BcKind::Neumann,
            other => return Err(config_err(e.line, format!("unknown boundary kind {other:?}"))),
        };
        let rest = rest.trim();
        let data = if rest.is_empty() {
            None
        } else {
            let inner = Entry {
                value: rest.to_string(),
                line: e.line,
            };
            Some(expr_func(expr_at(e, &unquote(&inner)?)?))
        };
        boundary = boundary.with_face(mode, side, kind, data);
    }
    Ok(ProblemSpec {
        operator: OperatorSpec::General(op),
        rhs: Rhs::Function(rhs),
        boundary,
        degrees,
        solver: SolverOptions::default(),
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let c = ConfigFile::parse("preset = poisson # trailing\n[solver]\ncp_rank = 3\n").unwrap();
        assert_eq!(c.get("run.preset").unwrap().value, "poisson");
        assert_eq!(c.get("solver.cp_rank").unwrap().line, 3);
    }

    #[test]
    fn errors_carry_lines() {
        let e = ConfigFile::parse("[run]\nn = 3\nnonsense\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let c = ConfigFile::parse("[operator]\ncoeff.2.0.0 = \"1 +\"\n").unwrap();
        let err = RunConfig::from_file(&c).err().unwrap();
        assert!(err.to_string().contains("inline problems need"), "{err}");
    }

    #[test]
    fn inline_problem_parses() {
        let text = r#"
n = 4
[operator]
coeff.2.0.0 = "1"
coeff.0.2.0 = "1"
coeff.0.0.2 = "1"
rhs = "6"
exact = "x^2 + y^2 + z^2"
[boundary]
bc.x.min = dirichlet "1 + y^2 + z^2"
bc.x.max = dirichlet "1 + y^2 + z^2"
bc.y.min = dirichlet "x^2 + 1 + z^2"
bc.y.max = dirichlet "x^2 + 1 + z^2"
bc.z.min = dirichlet "x^2 + y^2 + 1"
bc.z.max = dirichlet "x^2 + y^2 + 1"
"#;
        let rc = RunConfig::from_file(&ConfigFile::parse(text).unwrap()).unwrap();
        let Problem::Inline(p) = rc.problem else {
            panic!("expected inline")
        };
        let s = spectracube::drivers::solve_stationary(&p).unwrap();
        assert!(s.sampled_error.unwrap() < 1e-12);
    }
}
