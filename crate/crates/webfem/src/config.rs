//! JSON run configuration: domain trees or builtins, grid sweeps, problem
//! coefficients as expression strings, quadrature/solver knobs and output
//! settings, plus dotted-path `--set` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{BuiltinDomain, DomainSpec, WeightExpr};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::problem::{CoupledProblem, DiffusionMatrix};
use crate::quadrature::QuadConfig;
use crate::solver::SolverMethod;

/// A scalar or a list; used for grid sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// One node of a domain CSG tree as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainNode {
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    Circle {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_sign")]
        sign: f64,
    },
    Rand {
        args: Vec<DomainNode>,
    },
    Ror {
        args: Vec<DomainNode>,
    },
    Product {
        args: Vec<DomainNode>,
    },
    Expr {
        expr: String,
    },
}

fn default_sign() -> f64 {
    1.0
}

impl DomainNode {
    pub fn build(&self) -> Result<WeightExpr> {
        let fold = |args: &[DomainNode],
                    combine: fn(WeightExpr, WeightExpr) -> WeightExpr|
         -> Result<WeightExpr> {
            if args.len() < 2 {
                return Err(Error::Config(
                    "rand/ror need at least two arguments".into(),
                ));
            }
            let mut iter = args.iter();
            let mut acc = iter.next().unwrap().build()?;
            for next in iter {
                acc = combine(acc, next.build()?);
            }
            Ok(acc)
        };
        match self {
            DomainNode::Halfspace { normal, offset } => {
                let mut n = [0.0f64; 2];
                for (d, v) in normal.iter().take(2).enumerate() {
                    n[d] = *v;
                }
                Ok(WeightExpr::Halfspace { normal: n, offset: *offset })
            }
            DomainNode::Circle { center, radius, sign } => {
                let mut c = [0.0f64; 2];
                for (d, v) in center.iter().take(2).enumerate() {
                    c[d] = *v;
                }
                if *radius <= 0.0 {
                    return Err(Error::Config(format!("circle radius must be > 0, got {radius}")));
                }
                Ok(WeightExpr::Circle { center: c, radius: *radius, sign: *sign })
            }
            DomainNode::Rand { args } => fold(args, WeightExpr::rand),
            DomainNode::Ror { args } => fold(args, WeightExpr::ror),
            DomainNode::Product { args } => {
                let children: Vec<WeightExpr> =
                    args.iter().map(|a| a.build()).collect::<Result<_>>()?;
                if children.is_empty() {
                    return Err(Error::Config("product needs at least one argument".into()));
                }
                Ok(WeightExpr::Product(children))
            }
            DomainNode::Expr { expr } => WeightExpr::from_expr(expr),
        }
    }
}

/// Domain section: a named builtin, or an explicit tree with bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinDomain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<DomainNode>,
    /// Separate Dirichlet weight; defaults to the domain tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DomainNode>,
    /// Required with `tree`: per-dimension `[lo, hi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounding_box: Option<Vec<[f64; 2]>>,
}

impl DomainConfig {
    pub fn build(&self) -> Result<DomainSpec> {
        match (&self.builtin, &self.tree) {
            (Some(b), None) => Ok(b.build()),
            (None, Some(tree)) => {
                let bb = self.bounding_box.as_ref().ok_or_else(|| {
                    Error::Config("domain.tree requires domain.bounding_box".into())
                })?;
                if bb.is_empty() || bb.len() > 2 {
                    return Err(Error::Config(format!(
                        "bounding_box must have 1 or 2 dimensions, got {}",
                        bb.len()
                    )));
                }
                for r in bb {
                    if !(r[0] < r[1]) {
                        return Err(Error::Config(format!(
                            "bounding_box range [{}, {}] is empty",
                            r[0], r[1]
                        )));
                    }
                }
                let w_omega = tree.build()?;
                let w_dirichlet = match &self.dirichlet {
                    Some(d) => d.build()?,
                    None => w_omega.clone(),
                };
                Ok(DomainSpec::new(
                    w_omega,
                    w_dirichlet,
                    bb.iter().map(|r| (r[0], r[1])).collect(),
                ))
            }
            (Some(_), Some(_)) => {
                Err(Error::Config("domain: give either builtin or tree, not both".into()))
            }
            (None, None) => Err(Error::Config("domain: builtin or tree required".into())),
        }
    }
}

/// Grid sweep: scalar or list for both width and order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: OneOrMany<f64>,
    pub n: OneOrMany<u32>,
}

/// Diffusion matrix: a single isotropic expression or the upper triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiffusionConfig {
    Isotropic(String),
    Matrix {
        a11: String,
        #[serde(default = "zero_expr")]
        a12: String,
        a22: String,
    },
}

fn zero_expr() -> String {
    "0".into()
}

impl DiffusionConfig {
    fn build(&self) -> Result<DiffusionMatrix> {
        Ok(match self {
            DiffusionConfig::Isotropic(e) => DiffusionMatrix::isotropic(Expr::parse(e)?),
            DiffusionConfig::Matrix { a11, a12, a22 } => DiffusionMatrix {
                a11: Expr::parse(a11)?,
                a12: Expr::parse(a12)?,
                a22: Expr::parse(a22)?,
            },
        })
    }
}

/// Exact solution pair for verification / manufactured runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub u1: String,
    pub u2: String,
}

/// Problem section; everything defaults to the trivial value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<DiffusionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactConfig>,
    /// Replace f1/f2 with the strong operator applied to `exact`.
    #[serde(default)]
    pub manufactured: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            p: None,
            r: None,
            q1: None,
            q2: None,
            f1: None,
            f2: None,
            exact: None,
            manufactured: false,
        }
    }
}

/// Quadrature knobs; `None` means derived from the spline order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauss_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_depth: Option<u32>,
}

impl QuadratureConfig {
    pub fn resolve(&self, n: u32) -> QuadConfig {
        let base = QuadConfig::for_order(n);
        QuadConfig {
            gauss_points: self.gauss_points.unwrap_or(base.gauss_points),
            cut_depth: self.cut_depth.unwrap_or(base.cut_depth),
        }
    }
}

/// Solver section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: SolverMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Proceed despite a failing Theorem-style well-posedness gate.
    #[serde(default)]
    pub override_gate: bool,
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: SolverMethod::Auto, tol: default_tol(), override_gate: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Vtk,
}

impl Default for ExportFormat {
    fn default() -> Self {
        ExportFormat::Csv
    }
}

/// Output section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Field export samples per dimension.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub format: ExportFormat,
    /// Also dump the assembled matrix and load vector in Matrix Market
    /// format.
    #[serde(default)]
    pub dump_matrix: bool,
}

fn default_resolution() -> usize {
    50
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            resolution: default_resolution(),
            format: ExportFormat::Csv,
            dump_matrix: false,
        }
    }
}

/// The full declarative run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        RunConfig::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file, apply `--set key=value` overrides, validate.
    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| Error::ConfigNotFound(path.display().to_string()))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        apply_overrides(&mut value, overrides)?;
        RunConfig::from_value(value)
    }

    fn validate(&self) -> Result<()> {
        for h in self.grid.h.to_vec() {
            if !(h > 0.0) {
                return Err(Error::Config(format!("grid width h must be > 0, got {h}")));
            }
        }
        for n in self.grid.n.to_vec() {
            if n < 2 {
                return Err(Error::Config(format!("spline order n must be >= 2, got {n}")));
            }
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return Err(Error::Config(format!(
                "solver tol must lie in (0, 1), got {}",
                self.solver.tol
            )));
        }
        if self.output.resolution < 2 {
            return Err(Error::Config("output resolution must be >= 2".into()));
        }
        if self.problem.manufactured && self.problem.exact.is_none() {
            return Err(Error::Config(
                "problem.manufactured requires problem.exact".into(),
            ));
        }
        // everything must build/parse
        self.domain.build()?;
        self.build_problem()?;
        Ok(())
    }

    /// Assemble the typed problem description from the expression strings.
    pub fn build_problem(&self) -> Result<CoupledProblem> {
        let dom = self.domain.build()?;
        let dim = dom.dim;
        let pc = &self.problem;
        let parse_or = |s: &Option<String>, default: f64| -> Result<Expr> {
            match s {
                Some(text) => Ok(Expr::parse(text)?),
                None => Ok(Expr::num(default)),
            }
        };
        let p = match &pc.p {
            Some(d) => d.build()?,
            None => DiffusionMatrix::identity(),
        };
        let r = match &pc.r {
            None => [Expr::num(0.0), Expr::num(0.0)],
            Some(list) => {
                if list.len() != dim {
                    return Err(Error::Config(format!(
                        "problem.r needs {dim} components, got {}",
                        list.len()
                    )));
                }
                let mut r = [Expr::num(0.0), Expr::num(0.0)];
                for (d, s) in list.iter().enumerate() {
                    r[d] = Expr::parse(s)?;
                }
                r
            }
        };
        let exact = match &pc.exact {
            Some(e) => Some((Expr::parse(&e.u1)?, Expr::parse(&e.u2)?)),
            None => None,
        };
        let prob = CoupledProblem {
            dom,
            p,
            r,
            q1: parse_or(&pc.q1, 0.0)?,
            q2: parse_or(&pc.q2, 0.0)?,
            f1: parse_or(&pc.f1, 0.0)?,
            f2: parse_or(&pc.f2, 0.0)?,
            exact,
        };
        if pc.manufactured {
            prob.with_manufactured_rhs()
        } else {
            Ok(prob)
        }
    }
}

/// Apply `key.path=value` overrides to the raw JSON tree. Values parse as
/// JSON when possible and fall back to strings, so `--set problem.q1=x`
/// and `--set solver.tol=1e-8` both work.
pub fn apply_overrides(value: &mut serde_json::Value, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
        let parsed: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut cursor = &mut *value;
        let segments: Vec<&str> = path.split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(Error::Config(format!("override path {path:?} has empty segment")));
        }
        for segment in &segments[..segments.len() - 1] {
            if !cursor.is_object() {
                return Err(Error::Config(format!(
                    "override path {path:?}: {segment:?} is not an object"
                )));
            }
            cursor = cursor
                .as_object_mut()
                .unwrap()
                .entry(segment.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
        let last = segments[segments.len() - 1];
        match cursor.as_object_mut() {
            Some(map) => {
                map.insert(last.to_string(), parsed);
            }
            None => {
                return Err(Error::Config(format!(
                    "override path {path:?}: parent is not an object"
                )))
            }
        }
    }
    Ok(())
}
